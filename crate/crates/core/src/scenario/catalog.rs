//! Built-in scenarios, one per implemented conflict type.

use super::{parse_scenario, ScenarioSpec};

const CATALOG: &[(&str, &str)] = &[
    (
        "vanishing-markings",
        include_str!("../../scenarios/vanishing-markings.xml"),
    ),
    (
        "vanishing-markings-weather",
        include_str!("../../scenarios/vanishing-markings-weather.xml"),
    ),
    (
        "narrowing-road",
        include_str!("../../scenarios/narrowing-road.xml"),
    ),
    (
        "danger-zone",
        include_str!("../../scenarios/danger-zone.xml"),
    ),
    (
        "sensor-failure",
        include_str!("../../scenarios/sensor-failure.xml"),
    ),
    (
        "onramp-blocked",
        include_str!("../../scenarios/onramp-blocked.xml"),
    ),
];

pub const CATALOG_NAMES: &[&str] = &[
    "vanishing-markings",
    "vanishing-markings-weather",
    "narrowing-road",
    "danger-zone",
    "sensor-failure",
    "onramp-blocked",
];

pub fn catalog_xml(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, x)| *x)
}

pub fn catalog_scenario(name: &str) -> Option<ScenarioSpec> {
    catalog_xml(name).map(|x| parse_scenario(x).expect("built-in scenario is valid"))
}

pub fn builtin_catalog() -> Vec<ScenarioSpec> {
    CATALOG
        .iter()
        .map(|(_, x)| parse_scenario(x).expect("built-in scenario is valid"))
        .collect()
}
