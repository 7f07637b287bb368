//! Conflict registry, world injections and the conflict monitor.
//!
//! The registry holds the five high-urgency conflict types the simulator
//! reproduces. Injection events mutate the per-episode [`WorldConditions`]
//! at tick boundaries; the monitor maps perception and controller flags back
//! to a registered conflict id.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ConflictFlag;
use crate::perception::PerceptionFrame;
use crate::scenario::ObstacleDecl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectorKind {
    Location,
    SensorNoise,
    StaticObstacle,
    DynamicObstacle,
    Weather,
    MarkingDegradation,
    SensorFailure,
    MergeBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConflictSpec {
    pub id: u32,
    pub name: &'static str,
    pub urgency: u8,
    pub response_min: u8,
    pub response_max: u8,
    pub injector: InjectorKind,
}

pub const SENSOR_FAILURE: u32 = 2;
pub const ONRAMP_BLOCKED: u32 = 5;
pub const ROAD_NARROWS: u32 = 7;
pub const DANGER_ZONE: u32 = 9;
pub const LOSS_OF_REFERENCE: u32 = 10;

const REGISTRY: [ConflictSpec; 5] = [
    ConflictSpec {
        id: SENSOR_FAILURE,
        name: "Sensor failure (total)",
        urgency: 3,
        response_min: 1,
        response_max: 2,
        injector: InjectorKind::SensorFailure,
    },
    ConflictSpec {
        id: ONRAMP_BLOCKED,
        name: "Lane change from entrance ramp not possible",
        urgency: 3,
        response_min: 3,
        response_max: 3,
        injector: InjectorKind::MergeBlock,
    },
    ConflictSpec {
        id: ROAD_NARROWS,
        name: "Road narrows (detected by on-board sensors)",
        urgency: 3,
        response_min: 2,
        response_max: 2,
        injector: InjectorKind::StaticObstacle,
    },
    ConflictSpec {
        id: DANGER_ZONE,
        name: "Danger zone/obstacle ahead",
        urgency: 3,
        response_min: 1,
        response_max: 3,
        injector: InjectorKind::StaticObstacle,
    },
    ConflictSpec {
        id: LOSS_OF_REFERENCE,
        name: "Loss of reference signals (e.g. lane markings missing)",
        urgency: 3,
        response_min: 1,
        response_max: 1,
        injector: InjectorKind::MarkingDegradation,
    },
];

#[derive(Debug, Error, PartialEq)]
pub enum ConflictError {
    #[error("unknown conflict id {id}; registered ids: {}", registered_ids().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "))]
    UnknownConflict { id: u32 },
    #[error("injection event {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },
}

pub fn registry() -> &'static [ConflictSpec] {
    &REGISTRY
}

pub fn registered_ids() -> Vec<u32> {
    REGISTRY.iter().map(|c| c.id).collect()
}

pub fn registry_get(id: u32) -> Result<&'static ConflictSpec, ConflictError> {
    REGISTRY
        .iter()
        .find(|c| c.id == id)
        .ok_or(ConflictError::UnknownConflict { id })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Episode time in seconds.
    Time(f64),
    /// Distance driven by the ego since spawn, in meters.
    Distance(f64),
}

impl Trigger {
    pub fn value(self) -> f64 {
        match self {
            Trigger::Time(v) | Trigger::Distance(v) => v,
        }
    }

    pub fn reached(self, t: f64, ego_s: f64) -> bool {
        // tolerance absorbs k·dt rounding so a trigger at 5.0 fires on tick 100
        match self {
            Trigger::Time(v) => t + 1e-9 >= v,
            Trigger::Distance(v) => ego_s + 1e-9 >= v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionAction {
    SetSensorNoise { sigma: f64 },
    SetSensorFailed { failed: bool },
    SetWeather { id: u32 },
    SpawnObstacle(ObstacleDecl),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionEvent {
    pub trigger: Trigger,
    pub action: InjectionAction,
}

impl InjectionEvent {
    pub fn new(trigger: Trigger, action: InjectionAction) -> Self {
        Self { trigger, action }
    }
}

/// World state that injections may change during an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldConditions {
    pub sigma: f64,
    pub sensor_failed: bool,
    pub failure_onset: Option<f64>,
    pub weather_id: u32,
    pub obstacles: Vec<ObstacleDecl>,
}

impl WorldConditions {
    pub fn new(sigma: f64, weather_id: u32, obstacles: Vec<ObstacleDecl>) -> Self {
        Self {
            sigma,
            sensor_failed: false,
            failure_onset: None,
            weather_id,
            obstacles,
        }
    }

    fn apply(&mut self, action: &InjectionAction, t: f64) {
        match action {
            InjectionAction::SetSensorNoise { sigma } => self.sigma = *sigma,
            InjectionAction::SetSensorFailed { failed } => {
                if *failed && !self.sensor_failed {
                    self.failure_onset = Some(t);
                }
                if !*failed {
                    self.failure_onset = None;
                }
                self.sensor_failed = *failed;
            }
            InjectionAction::SetWeather { id } => self.weather_id = *id,
            InjectionAction::SpawnObstacle(decl) => {
                if !self.obstacles.contains(decl) {
                    self.obstacles.push(decl.clone());
                }
            }
        }
    }
}

/// Tracks which events of a schedule have fired.
#[derive(Debug, Clone)]
pub struct InjectionSchedule {
    events: Vec<InjectionEvent>,
    fired: Vec<bool>,
}

impl InjectionSchedule {
    /// Events are ordered by trigger value (stable), time and distance
    /// triggers interleaved by value.
    pub fn new(mut events: Vec<InjectionEvent>) -> Self {
        events.sort_by(|a, b| a.trigger.value().total_cmp(&b.trigger.value()));
        let fired = vec![false; events.len()];
        Self { events, fired }
    }

    pub fn events(&self) -> &[InjectionEvent] {
        &self.events
    }

    pub fn pending(&self) -> usize {
        self.fired.iter().filter(|f| !**f).count()
    }
}

/// Applies every not-yet-fired event whose trigger has been reached. Returns
/// the events applied on this call, in application order.
pub fn apply_injections(
    world: &mut WorldConditions,
    schedule: &mut InjectionSchedule,
    t: f64,
    ego_s: f64,
) -> Vec<InjectionEvent> {
    let mut applied = Vec::new();
    for (ev, fired) in schedule.events.iter().zip(schedule.fired.iter_mut()) {
        if !*fired && ev.trigger.reached(t, ego_s) {
            world.apply(&ev.action, t);
            *fired = true;
            applied.push(ev.clone());
        }
    }
    applied
}

/// Supporting measurements for a reported conflict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    SensorFailure { onset: f64 },
    LowConfidence { confidence: f64 },
    LaneBlocked { gap: f64 },
    NarrowPassage { gap: f64, free_width: f64 },
    MergeInfeasible { remaining: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveConflict {
    pub id: u32,
    pub evidence: Evidence,
}

/// Maps the current observations to the most urgent registered conflict;
/// ties break towards the lowest id.
pub fn conflict_monitor(
    world: &WorldConditions,
    perception: &PerceptionFrame,
    flags: &[ConflictFlag],
    critical: f64,
) -> Option<ActiveConflict> {
    let mut active: Vec<ActiveConflict> = Vec::new();
    if world.sensor_failed || perception.sensor_failed {
        let onset = world.failure_onset.unwrap_or(perception.t);
        active.push(ActiveConflict {
            id: SENSOR_FAILURE,
            evidence: Evidence::SensorFailure { onset },
        });
    }
    if perception.confidence < critical {
        active.push(ActiveConflict {
            id: LOSS_OF_REFERENCE,
            evidence: Evidence::LowConfidence {
                confidence: perception.confidence,
            },
        });
    }
    for flag in flags {
        let c = match *flag {
            ConflictFlag::LaneBlocked { gap, .. } => ActiveConflict {
                id: DANGER_ZONE,
                evidence: Evidence::LaneBlocked { gap },
            },
            ConflictFlag::EvasionNeedsOppositeLane {
                gap, free_width, ..
            } => ActiveConflict {
                id: ROAD_NARROWS,
                evidence: Evidence::NarrowPassage { gap, free_width },
            },
            ConflictFlag::MergeInfeasible { remaining } => ActiveConflict {
                id: ONRAMP_BLOCKED,
                evidence: Evidence::MergeInfeasible { remaining },
            },
        };
        active.push(c);
    }
    active.into_iter().min_by_key(|c| {
        let urgency = registry_get(c.id).map(|s| s.urgency).unwrap_or(0);
        (std::cmp::Reverse(urgency), c.id)
    })
}
