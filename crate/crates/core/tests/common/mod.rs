#![allow(dead_code)]

pub mod audit;
pub mod fuzz;

use std::f64::consts::TAU;

use conflictsim_core::control::ControllerRegistry;
use conflictsim_core::engine::{Episode, EpisodeConfig, EpisodeLog, OperatorScript};
use conflictsim_core::geom::Vec2;
use conflictsim_core::roadnet::{
    Adjacency, LaneBuilder, LaneId, MarkingKind, MarkingSegment, RoadNetwork, SpawnPoint,
};
use conflictsim_core::scenario::{catalog_scenario, BuiltinMaps, ScenarioSpec, StartSpec};

pub fn dashed(len: f64) -> Vec<MarkingSegment> {
    vec![MarkingSegment::new(0.0, len, MarkingKind::Dashed, 1.0)]
}

fn polyline_len(p: &[Vec2]) -> f64 {
    p.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Single closed counter-clockwise lane of radius `r` around the origin,
/// spawn `start` at `(r, 0)` heading north.
pub fn circle_network(r: f64, segments: usize) -> RoadNetwork {
    let pts: Vec<Vec2> = (0..=segments)
        .map(|i| {
            let a = TAU * i as f64 / segments as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let len = polyline_len(&pts);
    let lane = LaneBuilder {
        id: LaneId(0),
        centerline: pts,
        width: 3.5,
        left_marking: dashed(len),
        right_marking: dashed(len),
        successor: Some(LaneId(0)),
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .unwrap();
    let spawn = SpawnPoint {
        name: "start".into(),
        lane: LaneId(0),
        x: r,
        y: 0.0,
        theta: TAU / 4.0,
    };
    RoadNetwork::new(
        "circle",
        vec![lane],
        vec![Adjacency::default()],
        vec![spawn],
    )
    .unwrap()
}

/// One straight lane along +x with perfect dashed markings.
pub fn straight_network(len: f64) -> RoadNetwork {
    let lane = LaneBuilder {
        id: LaneId(0),
        centerline: vec![Vec2::new(0.0, 0.0), Vec2::new(len, 0.0)],
        width: 3.5,
        left_marking: dashed(len),
        right_marking: dashed(len),
        successor: None,
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .unwrap();
    let spawn = SpawnPoint {
        name: "start".into(),
        lane: LaneId(0),
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };
    RoadNetwork::new(
        "straight",
        vec![lane],
        vec![Adjacency::default()],
        vec![spawn],
    )
    .unwrap()
}

pub fn plain_scenario(map: &str) -> ScenarioSpec {
    ScenarioSpec::new("plain", map, StartSpec::Spawn("start".into()))
}

pub fn catalog_episode(name: &str, seed: u64) -> Episode {
    let spec = catalog_scenario(name).unwrap_or_else(|| panic!("no catalog scenario {name}"));
    Episode::new(
        EpisodeConfig::new(spec).with_seed(seed),
        &BuiltinMaps,
        &ControllerRegistry::with_builtins(),
    )
    .unwrap()
}

pub fn run_catalog(name: &str, seed: u64, script: &OperatorScript) -> EpisodeLog {
    catalog_episode(name, seed).run(script)
}
