//! Vehicle kinematics, footprints and traffic actors.

mod collision;
mod traffic;

pub use collision::{check_collision, CollisionReport, Footprint, ObjectId, ObjectKind};
pub use traffic::{
    spawn_traffic, step_traffic, ActorKind, TrafficActor, PEDESTRIAN_SIZE, PEDESTRIAN_SPEED,
};

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Vec2};
use crate::roadnet::{LaneRef, RoadNetwork};

/// Simulation step, seconds (20 Hz).
pub const DT: f64 = 0.05;
pub const WHEELBASE: f64 = 2.7;
pub const VEHICLE_LENGTH: f64 = 4.5;
pub const VEHICLE_WIDTH: f64 = 2.0;
pub const ACCEL_MIN: f64 = -6.0;
pub const ACCEL_MAX: f64 = 3.0;
pub const STEER_MAX: f64 = 0.5;

/// Longitudinal distance from the rear axle (the state reference) to the
/// footprint center.
pub const CENTER_OFFSET: f64 = WHEELBASE / 2.0;
/// Rear axle to front bumper.
pub const FRONT_OVERHANG: f64 = CENTER_OFFSET + VEHICLE_LENGTH / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub accel: f64,
    pub steer: f64,
}

impl ControlCommand {
    /// Clamped to the actuator limits; non-finite components become zero.
    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }.sanitized()
    }

    pub fn sanitized(self) -> Self {
        let clean = |v: f64, lo: f64, hi: f64| if v.is_finite() { v.clamp(lo, hi) } else { 0.0 };
        Self {
            accel: clean(self.accel, ACCEL_MIN, ACCEL_MAX),
            steer: clean(self.steer, -STEER_MAX, STEER_MAX),
        }
    }
}

/// Ego state; `(x, y)` is the rear-axle position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub lane_ref: LaneRef,
}

impl VehicleState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn footprint(&self) -> Footprint {
        let c = self.position() + Vec2::from_angle(self.theta) * CENTER_OFFSET;
        Footprint::new(
            ObjectId::ego(),
            c,
            self.theta,
            VEHICLE_LENGTH,
            VEHICLE_WIDTH,
        )
    }
}

/// One explicit-Euler step of the kinematic bicycle model. The lane
/// reference is carried over unchanged.
pub fn step_kinematics(state: &VehicleState, cmd: ControlCommand, dt: f64) -> VehicleState {
    let cmd = cmd.sanitized();
    let VehicleState { x, y, theta, v, .. } = *state;
    VehicleState {
        x: x + v * theta.cos() * dt,
        y: y + v * theta.sin() * dt,
        theta: normalize_angle(theta + v / WHEELBASE * cmd.steer.tan() * dt),
        v: (v + cmd.accel * dt).max(0.0),
        lane_ref: state.lane_ref,
    }
}

/// Kinematic step followed by lane re-localization.
pub fn step_bicycle(
    state: &VehicleState,
    cmd: ControlCommand,
    dt: f64,
    net: &RoadNetwork,
) -> VehicleState {
    let mut next = step_kinematics(state, cmd, dt);
    next.lane_ref = net.localize(state.lane_ref.lane, next.position());
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::LaneId;

    fn at(x: f64, y: f64, theta: f64, v: f64) -> VehicleState {
        VehicleState {
            x,
            y,
            theta,
            v,
            lane_ref: LaneRef {
                lane: LaneId(0),
                s: 0.0,
                d: 0.0,
            },
        }
    }

    #[test]
    fn straight_step() {
        let n = step_kinematics(&at(0.0, 0.0, 0.0, 10.0), ControlCommand::new(0.0, 0.0), DT);
        assert_eq!((n.x, n.y, n.theta, n.v), (0.5, 0.0, 0.0, 10.0));
    }

    #[test]
    fn speed_floor() {
        let n = step_kinematics(&at(0.0, 0.0, 0.0, 0.1), ControlCommand::new(-6.0, 0.0), DT);
        assert_eq!(n.v, 0.0);
    }

    #[test]
    fn heading_wraps() {
        let n = step_kinematics(
            &at(0.0, 0.0, std::f64::consts::PI - 0.001, 20.0),
            ControlCommand::new(0.0, 0.5),
            DT,
        );
        assert!(n.theta < 0.0 && n.theta > -std::f64::consts::PI);
    }

    #[test]
    fn command_sanitized() {
        assert_eq!(
            ControlCommand::new(10.0, -3.0),
            ControlCommand {
                accel: 3.0,
                steer: -0.5
            }
        );
        assert_eq!(
            ControlCommand::new(f64::NAN, f64::INFINITY),
            ControlCommand {
                accel: 0.0,
                steer: 0.0
            }
        );
        let raw = ControlCommand {
            accel: -100.0,
            steer: 1.0,
        };
        let n = step_kinematics(&at(0.0, 0.0, 0.0, 10.0), raw, DT);
        assert_eq!(n.v, 10.0 - 6.0 * DT);
    }
}
