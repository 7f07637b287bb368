//! Controller layer: the controller registry, the lane-following
//! controller and the tracking laws it is built from.

mod lane_follow;

pub use lane_follow::LaneFollow;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    step_kinematics, ControlCommand, ObjectId, TrafficActor, VehicleState, DT, STEER_MAX, WHEELBASE,
};
use crate::geom::Vec2;
use crate::perception::PerceptionFrame;
use crate::roadnet::{LaneId, RoadNetwork};
use crate::scenario::ObstacleDecl;

pub const DEFAULT_CONTROLLER: &str = "lane-follow";
pub const PATH_HORIZON: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("lookahead target is behind the vehicle")]
    TargetBehind,
    #[error("unknown controller `{name}`; available: {}", available.join(", "))]
    UnknownController {
        name: String,
        available: Vec<String>,
    },
    #[error("controller name `{0}` must be lowercase")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControllerId(pub String);

impl Default for ControllerId {
    fn default() -> Self {
        Self(DEFAULT_CONTROLLER.to_string())
    }
}

impl fmt::Display for ControllerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Raised by a controller when it cannot resolve the situation itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConflictFlag {
    LaneBlocked {
        obstacle: ObjectId,
        gap: f64,
    },
    EvasionNeedsOppositeLane {
        obstacle: ObjectId,
        gap: f64,
        free_width: f64,
        solid: bool,
    },
    MergeInfeasible {
        remaining: f64,
    },
}

/// Everything a controller may look at on one tick.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub network: &'a RoadNetwork,
    pub ego: &'a VehicleState,
    pub obstacles: &'a [ObstacleDecl],
    pub actors: &'a [TrafficActor],
    pub v_ref: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PredictedPath {
    pub points: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub command: ControlCommand,
    pub path: PredictedPath,
    pub flags: Vec<ConflictFlag>,
    /// Lane the controller is steering towards.
    pub target_lane: LaneId,
}

pub trait Controller: Send {
    fn name(&self) -> &str;
    fn plan_tick(&mut self, view: &WorldView<'_>, perception: &PerceptionFrame) -> Plan;
}

type Factory = fn() -> Box<dyn Controller>;

/// Name → factory table; built once at startup.
pub struct ControllerRegistry {
    entries: Vec<(String, Factory)>,
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(DEFAULT_CONTROLLER, || Box::new(LaneFollow::new()))
            .expect("builtin name is valid");
        r
    }

    pub fn register(&mut self, name: &str, factory: Factory) -> Result<(), ControlError> {
        if name.is_empty() || name.chars().any(|c| c.is_uppercase() || c.is_whitespace()) {
            return Err(ControlError::InvalidName(name.to_string()));
        }
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.to_string(), factory));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn create(&self, id: &ControllerId) -> Result<Box<dyn Controller>, ControlError> {
        self.entries
            .iter()
            .find(|(n, _)| *n == id.0)
            .map(|(_, f)| f())
            .ok_or_else(|| ControlError::UnknownController {
                name: id.0.clone(),
                available: self.names(),
            })
    }
}

/// Minimum-distance braking envelope, `v²/8 + 0.5·v`.
pub fn stopping_distance(v: f64) -> f64 {
    v * v / 8.0 + 0.5 * v
}

/// Proportional speed tracking, `clamp(0.8·(v_ref − v), −4, 2)`.
pub fn speed_control(v: f64, v_ref: f64) -> f64 {
    (0.8 * (v_ref - v)).clamp(-4.0, 2.0)
}

/// Lookahead distance along the lane, `max(5, 0.8·v)`.
pub fn lookahead(v: f64) -> f64 {
    (0.8 * v).max(5.0)
}

/// Pure pursuit from the rear axle towards a world-frame target.
pub fn pure_pursuit_steer(ego: &VehicleState, target: Vec2) -> Result<f64, ControlError> {
    let local = target.to_local(ego.position(), ego.theta);
    if !(local.x > 0.0) {
        return Err(ControlError::TargetBehind);
    }
    let ld = local.norm();
    let sin_alpha = local.y / ld;
    Ok((2.0 * WHEELBASE * sin_alpha / ld)
        .atan()
        .clamp(-STEER_MAX, STEER_MAX))
}

/// Steering that tracks `lane` at lateral offset `shift`. `offset_error` is
/// true minus measured offset and moves the target with the perception error.
pub fn lane_keep_steer(
    net: &RoadNetwork,
    ego: &VehicleState,
    lane: LaneId,
    shift: f64,
    offset_error: f64,
) -> f64 {
    let Some(spec) = net.lane(lane) else {
        return 0.0;
    };
    let s = if lane == ego.lane_ref.lane {
        ego.lane_ref.s
    } else {
        spec.project(ego.position()).s
    };
    let mut ld = lookahead(ego.v);
    for _ in 0..4 {
        if let Some(target) = net.point_ahead(lane, s, ld, shift + offset_error) {
            if let Ok(steer) = pure_pursuit_steer(ego, target) {
                return steer;
            }
        }
        ld *= 2.0;
    }
    0.0
}

/// Bicycle-model rollout under a frozen command; the first point is the
/// current position.
pub fn predict_path(
    ego: &VehicleState,
    cmd: ControlCommand,
    horizon: f64,
    dt: f64,
) -> PredictedPath {
    let n = (horizon / dt).round() as usize;
    let mut points = Vec::with_capacity(n);
    let mut s = *ego;
    for i in 0..n {
        if i > 0 {
            s = step_kinematics(&s, cmd, dt);
        }
        points.push(s.position());
    }
    PredictedPath { points }
}

pub fn predict_default(ego: &VehicleState, cmd: ControlCommand) -> PredictedPath {
    predict_path(ego, cmd, PATH_HORIZON, DT)
}
