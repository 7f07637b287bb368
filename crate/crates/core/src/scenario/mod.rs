//! Scenario descriptions: the parsed and validated form of a scenario XML
//! document, weather presets and the built-in catalog.

mod catalog;
mod xml;

pub use catalog::{builtin_catalog, catalog_scenario, catalog_xml, CATALOG_NAMES};
pub use xml::{parse_scenario, parse_scenario_with, serialize_scenario};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflicts::{registry_get, InjectionAction, InjectionEvent};
use crate::roadnet::{
    build_builtin_map, load_network, LaneId, RoadError, RoadNetwork, BUILTIN_MAPS,
};
use crate::supervisor::SupervisorConfig;

pub const DEFAULT_V_REF: f64 = 15.0;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("malformed XML at line {line}, column {col}: {message}")]
    Xml {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("line {line}: {message}")]
    Schema { line: u32, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Map(#[from] RoadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeatherPreset {
    pub id: u32,
    pub name: &'static str,
    pub visibility: f64,
}

const WEATHER_PRESETS: [WeatherPreset; 9] = [
    WeatherPreset {
        id: 0,
        name: "ClearNoon",
        visibility: 1.0,
    },
    WeatherPreset {
        id: 1,
        name: "CloudyNoon",
        visibility: 0.95,
    },
    WeatherPreset {
        id: 2,
        name: "WetNoon",
        visibility: 0.85,
    },
    WeatherPreset {
        id: 3,
        name: "WetCloudyNoon",
        visibility: 0.75,
    },
    WeatherPreset {
        id: 4,
        name: "SoftRainNoon",
        visibility: 0.70,
    },
    WeatherPreset {
        id: 5,
        name: "MidRainyNoon",
        visibility: 0.60,
    },
    WeatherPreset {
        id: 6,
        name: "HardRainNoon",
        visibility: 0.50,
    },
    WeatherPreset {
        id: 7,
        name: "ClearSunset",
        visibility: 0.90,
    },
    WeatherPreset {
        id: 8,
        name: "HardRainSunset",
        visibility: 0.45,
    },
];

pub fn weather_presets() -> &'static [WeatherPreset] {
    &WEATHER_PRESETS
}

pub fn weather_preset(id: u32) -> Option<&'static WeatherPreset> {
    WEATHER_PRESETS.iter().find(|w| w.id == id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSpec {
    Spawn(String),
    Pose(Pose),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Blocking {
    Partial,
    Full,
}

impl Blocking {
    pub fn as_str(self) -> &'static str {
        match self {
            Blocking::Partial => "partial",
            Blocking::Full => "full",
        }
    }
}

/// A static obstacle placed relative to a lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleDecl {
    pub lane: LaneId,
    pub s: f64,
    pub lateral_offset: f64,
    /// Heading relative to the lane direction, radians.
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub blocking: Blocking,
}

impl ObstacleDecl {
    pub fn new(
        lane: LaneId,
        s: f64,
        lateral_offset: f64,
        yaw: f64,
        length: f64,
        width: f64,
        blocking: Blocking,
    ) -> Self {
        Self {
            lane,
            s,
            lateral_offset,
            yaw,
            length,
            width,
            blocking,
        }
    }

    /// Extent of the rotated footprint across the lane.
    pub fn lateral_span(&self) -> f64 {
        self.length * self.yaw.sin().abs() + self.width * self.yaw.cos().abs()
    }

    /// Extent of the rotated footprint along the lane.
    pub fn longitudinal_span(&self) -> f64 {
        self.length * self.yaw.cos().abs() + self.width * self.yaw.sin().abs()
    }

    pub fn validate(&self, net: &RoadNetwork) -> Result<(), String> {
        for (what, v) in [
            ("s", self.s),
            ("lateral_offset", self.lateral_offset),
            ("yaw", self.yaw),
        ] {
            if !v.is_finite() {
                return Err(format!("obstacle {what} must be finite"));
            }
        }
        if !(self.length > 0.0 && self.width > 0.0)
            || !self.length.is_finite()
            || !self.width.is_finite()
        {
            return Err("obstacle footprint must be positive".into());
        }
        let lane = net
            .lane(self.lane)
            .ok_or_else(|| format!("obstacle lane {} is not on map `{}`", self.lane, net.name()))?;
        if !(0.0..=lane.length()).contains(&self.s) {
            return Err(format!(
                "obstacle at s={} is off-road (lane {} has length {:.1})",
                self.s,
                self.lane,
                lane.length()
            ));
        }
        if self.lateral_offset.abs() > lane.width() / 2.0 + self.lateral_span() / 2.0 {
            return Err(format!(
                "obstacle lateral offset {} does not touch lane {}",
                self.lateral_offset, self.lane
            ));
        }
        if self.blocking == Blocking::Full && self.lateral_span() + 1e-9 < lane.width() {
            return Err(format!(
                "blocking=full obstacle spans {:.2} m, less than lane width {:.2} m",
                self.lateral_span(),
                lane.width()
            ));
        }
        Ok(())
    }
}

/// A scripted lane entry by one traffic vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutIn {
    pub vehicle: u32,
    pub t: f64,
    pub lane: LaneId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficDecl {
    pub vehicles: u32,
    pub pedestrians: u32,
    /// Lane for vehicles; `None` spreads them over all lanes.
    pub lane: Option<LaneId>,
    pub s0: f64,
    pub spacing: f64,
    pub speed: f64,
    /// Uniform position jitter amplitude in meters.
    pub jitter: f64,
    pub cut_ins: Vec<CutIn>,
}

impl Default for TrafficDecl {
    fn default() -> Self {
        Self {
            vehicles: 0,
            pedestrians: 0,
            lane: None,
            s0: 0.0,
            spacing: 25.0,
            speed: 10.0,
            jitter: 0.0,
            cut_ins: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictDecl {
    pub id: u32,
    pub events: Vec<InjectionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub map: String,
    pub start: StartSpec,
    /// Alternate spawn points, by name.
    pub alternates: Vec<String>,
    pub destination: Option<Pose>,
    pub weather_id: u32,
    pub sensor_noise_sigma: f64,
    pub v_ref: f64,
    pub supervisor: SupervisorConfig,
    pub static_obstacles: Vec<ObstacleDecl>,
    pub traffic: TrafficDecl,
    pub conflict: Option<ConflictDecl>,
}

impl ScenarioSpec {
    /// A scenario with every optional field at its default.
    pub fn new(name: impl Into<String>, map: impl Into<String>, start: StartSpec) -> Self {
        Self {
            name: name.into(),
            map: map.into(),
            start,
            alternates: vec![],
            destination: None,
            weather_id: 0,
            sensor_noise_sigma: 0.0,
            v_ref: DEFAULT_V_REF,
            supervisor: SupervisorConfig::default(),
            static_obstacles: vec![],
            traffic: TrafficDecl::default(),
            conflict: None,
        }
    }

    pub fn conflict_id(&self) -> Option<u32> {
        self.conflict.as_ref().map(|c| c.id)
    }

    pub fn events(&self) -> &[InjectionEvent] {
        self.conflict
            .as_ref()
            .map(|c| c.events.as_slice())
            .unwrap_or(&[])
    }

    pub fn weather(&self) -> &'static WeatherPreset {
        weather_preset(self.weather_id).unwrap_or(&WEATHER_PRESETS[0])
    }

    /// Checks every cross-reference against the resolved map.
    pub fn validate(&self, net: &RoadNetwork) -> Result<(), ScenarioError> {
        let fail = |m: String| Err(ScenarioError::Validation(m));
        if self.name.trim().is_empty() {
            return fail("scenario name must not be empty".into());
        }
        if !(self.sensor_noise_sigma >= 0.0) || !self.sensor_noise_sigma.is_finite() {
            return fail("sensor_noise must be ≥ 0".into());
        }
        if !(self.v_ref > 0.0) || !self.v_ref.is_finite() {
            return fail("v_ref must be > 0".into());
        }
        if weather_preset(self.weather_id).is_none() {
            return fail(format!("unknown weather id {}", self.weather_id));
        }
        self.supervisor
            .validate()
            .map_err(ScenarioError::Validation)?;
        match &self.start {
            StartSpec::Spawn(name) => {
                if net.spawn(name).is_none() {
                    return fail(format!(
                        "start `{name}` is not a spawn point on map `{}`",
                        net.name()
                    ));
                }
            }
            StartSpec::Pose(p) => {
                if ![p.x, p.y, p.theta].iter().all(|v| v.is_finite()) {
                    return fail("start pose must be finite".into());
                }
            }
        }
        for alt in &self.alternates {
            if net.spawn(alt).is_none() {
                return fail(format!(
                    "alternate `{alt}` is not a spawn point on map `{}`",
                    net.name()
                ));
            }
        }
        if let Some(d) = &self.destination {
            if ![d.x, d.y, d.theta].iter().all(|v| v.is_finite()) {
                return fail("destination must be finite".into());
            }
        }
        for (i, o) in self.static_obstacles.iter().enumerate() {
            o.validate(net)
                .map_err(|e| ScenarioError::Validation(format!("obstacle {i}: {e}")))?;
        }
        self.validate_traffic(net)?;
        if let Some(c) = &self.conflict {
            registry_get(c.id).map_err(|e| ScenarioError::Validation(e.to_string()))?;
            for (i, ev) in c.events.iter().enumerate() {
                let v = ev.trigger.value();
                if !(v >= 0.0) || !v.is_finite() {
                    return fail(format!("event {i}: trigger must be non-negative"));
                }
                match &ev.action {
                    InjectionAction::SetSensorNoise { sigma }
                        if !(*sigma >= 0.0) || !sigma.is_finite() =>
                    {
                        return fail(format!("event {i}: sensor_noise must be ≥ 0"));
                    }
                    InjectionAction::SetWeather { id } if weather_preset(*id).is_none() => {
                        return fail(format!("event {i}: unknown weather id {id}"));
                    }
                    InjectionAction::SpawnObstacle(o) => {
                        o.validate(net)
                            .map_err(|e| ScenarioError::Validation(format!("event {i}: {e}")))?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn validate_traffic(&self, net: &RoadNetwork) -> Result<(), ScenarioError> {
        let t = &self.traffic;
        let fail = |m: String| Err(ScenarioError::Validation(format!("traffic: {m}")));
        if let Some(l) = t.lane {
            if net.lane(l).is_none() {
                return fail(format!("lane {l} is not on map `{}`", net.name()));
            }
        }
        for (what, v) in [
            ("s0", t.s0),
            ("spacing", t.spacing),
            ("speed", t.speed),
            ("jitter", t.jitter),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(format!("{what} must be a non-negative number"));
            }
        }
        if t.vehicles > 0 && !(t.spacing > 0.0) {
            return fail("spacing must be positive".into());
        }
        if t.vehicles > 10_000 || t.pedestrians > 10_000 {
            return fail("at most 10000 actors per kind".into());
        }
        for c in &t.cut_ins {
            if c.vehicle >= t.vehicles {
                return fail(format!(
                    "cut_in references vehicle {} but only {} are spawned",
                    c.vehicle, t.vehicles
                ));
            }
            if net.lane(c.lane).is_none() {
                return fail(format!(
                    "cut_in lane {} is not on map `{}`",
                    c.lane,
                    net.name()
                ));
            }
            if !(c.t >= 0.0) || !c.t.is_finite() {
                return fail("cut_in time must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Resolves map names referenced by scenarios.
pub trait MapResolver {
    fn resolve(&self, name: &str) -> Result<RoadNetwork, RoadError>;
}

/// Built-in maps only.
pub struct BuiltinMaps;

impl MapResolver for BuiltinMaps {
    fn resolve(&self, name: &str) -> Result<RoadNetwork, RoadError> {
        build_builtin_map(name)
    }
}

/// Built-in maps plus `*.json` road-network files relative to `base`.
pub struct FileMaps {
    pub base: PathBuf,
}

impl MapResolver for FileMaps {
    fn resolve(&self, name: &str) -> Result<RoadNetwork, RoadError> {
        if BUILTIN_MAPS.contains(&name) || !name.ends_with(".json") {
            return build_builtin_map(name);
        }
        load_network(&self.base.join(name))
    }
}
