use super::{
    lane_keep_steer, predict_default, speed_control, stopping_distance, ConflictFlag, Controller,
    Plan, WorldView,
};
use crate::dynamics::{
    ActorKind, ControlCommand, ObjectId, ACCEL_MIN, FRONT_OVERHANG, VEHICLE_LENGTH, VEHICLE_WIDTH,
};
use crate::perception::PerceptionFrame;
use crate::roadnet::{LaneId, LaneSpec, MarkingKind, Side};
use crate::scenario::Blocking;

const DETECTION_RANGE: f64 = 120.0;
/// Distance kept to a blocker when stopping in front of it.
pub const STOP_MARGIN: f64 = 2.0;
const PASS_CLEARANCE: f64 = 0.5;
const SLOW_ACTOR_SPEED: f64 = 2.0;
const FOLLOW_MIN_GAP: f64 = 5.0;
const FOLLOW_HEADWAY: f64 = 2.0;
pub const MERGE_HEADWAY: f64 = 2.0;
const REAR_OVERHANG: f64 = VEHICLE_LENGTH - FRONT_OVERHANG;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Latch {
    Object(ObjectId),
    Merge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HazardKind {
    Blocking,
    Narrow { free_width: f64, solid: bool },
    Passable { shift: f64 },
    Lead { speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hazard {
    id: ObjectId,
    /// Front bumper to the near face of the object, along the lane.
    gap: f64,
    kind: HazardKind,
}

/// Pure pursuit lane keeping with proportional speed control, in-lane
/// evasion, car following and on-ramp merging. Blocking situations are
/// flagged once inside the stopping distance and stay flagged while the
/// blocker remains ahead.
#[derive(Debug, Clone, Default)]
pub struct LaneFollow {
    latched: Vec<Latch>,
    merge_target: Option<LaneId>,
}

impl LaneFollow {
    pub fn new() -> Self {
        Self::default()
    }

    fn scan(&self, view: &WorldView<'_>, lane: &LaneSpec) -> Vec<Hazard> {
        let net = view.network;
        let r = view.ego.lane_ref;
        let half_w = lane.width() / 2.0;
        let looped = lane.successor() == Some(lane.id());
        let along = |s_obj: f64| {
            let mut ds = s_obj - r.s;
            if looped {
                let len = lane.length();
                ds = (ds + len / 2.0).rem_euclid(len) - len / 2.0;
            }
            ds
        };
        let mut out = Vec::new();

        for (i, o) in view.obstacles.iter().enumerate() {
            let Some(home) = net.lane(o.lane) else {
                continue;
            };
            let p = lane.project(home.offset_point(o.s, o.lateral_offset));
            let half_long = o.longitudinal_span() / 2.0;
            let ds = along(p.s);
            if ds + half_long < -REAR_OVERHANG || ds - half_long - FRONT_OVERHANG > DETECTION_RANGE
            {
                continue;
            }
            let half_lat = o.lateral_span() / 2.0;
            let (lo, hi) = (p.d - half_lat, p.d + half_lat);
            if hi <= -half_w || lo >= half_w {
                continue;
            }
            let gap = ds - half_long - FRONT_OVERHANG;
            let id = ObjectId::obstacle(i as u32);
            let left_free = (half_w - hi).max(0.0);
            let right_free = (lo + half_w).max(0.0);
            let kind = if o.blocking == Blocking::Full {
                HazardKind::Blocking
            } else if left_free.max(right_free) >= VEHICLE_WIDTH + PASS_CLEARANCE {
                let shift = if left_free >= right_free {
                    (half_w + hi) / 2.0
                } else {
                    (lo - half_w) / 2.0
                };
                HazardKind::Passable { shift }
            } else {
                let side = if left_free >= right_free {
                    Side::Left
                } else {
                    Side::Right
                };
                let solid = net.crossing_kind(r.lane, side, p.s) != Some(MarkingKind::Dashed);
                HazardKind::Narrow {
                    free_width: left_free.max(right_free),
                    solid,
                }
            };
            out.push(Hazard { id, gap, kind });
        }

        for a in view.actors {
            let p = lane.project(a.position(net));
            let (length, width) = a.size();
            let ds = along(p.s);
            if ds <= 0.0 || ds - length / 2.0 - FRONT_OVERHANG > DETECTION_RANGE {
                continue;
            }
            if p.d.abs() >= half_w + width / 2.0 {
                continue;
            }
            let gap = ds - length / 2.0 - FRONT_OVERHANG;
            let kind = if a.kind() == ActorKind::Pedestrian || a.speed < SLOW_ACTOR_SPEED {
                HazardKind::Blocking
            } else {
                HazardKind::Lead { speed: a.speed }
            };
            out.push(Hazard {
                id: a.id,
                gap,
                kind,
            });
        }
        out.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.id.cmp(&b.id)));
        out
    }

    /// Target-lane headway of at least [`MERGE_HEADWAY`] to the nearest
    /// vehicle ahead and behind.
    fn gap_accepted(view: &WorldView<'_>, target: LaneId) -> bool {
        let net = view.network;
        let Some(lane) = net.lane(target) else {
            return false;
        };
        let s_ego = lane.project(view.ego.position()).s;
        let half_w = lane.width() / 2.0;
        let mut lead: Option<(f64, f64)> = None;
        let mut follow: Option<(f64, f64)> = None;
        for a in view.actors {
            let p = lane.project(a.position(net));
            if p.d.abs() >= half_w + a.size().1 / 2.0 {
                continue;
            }
            let ds = p.s - s_ego;
            let gap = ds.abs() - VEHICLE_LENGTH;
            if ds >= 0.0 {
                if lead.is_none_or(|(g, _)| gap < g) {
                    lead = Some((gap, a.speed));
                }
            } else if follow.is_none_or(|(g, _)| gap < g) {
                follow = Some((gap, a.speed));
            }
        }
        let headway = |gap: f64, speed: f64| {
            if gap <= 0.0 {
                0.0
            } else {
                gap / speed.max(1e-6)
            }
        };
        let lead_ok = lead.is_none_or(|(g, _)| headway(g, view.ego.v) >= MERGE_HEADWAY);
        let follow_ok = follow.is_none_or(|(g, sp)| headway(g, sp) >= MERGE_HEADWAY);
        lead_ok && follow_ok
    }
}

fn follow_speed(gap: f64, lead_speed: f64) -> f64 {
    (lead_speed + 0.5 * (gap - FOLLOW_MIN_GAP - FOLLOW_HEADWAY * lead_speed)).max(0.0)
}

/// Constant deceleration that stops within `dist`; full braking once the
/// margin is used up.
fn stop_accel(v: f64, dist: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if dist <= 0.1 {
        return ACCEL_MIN;
    }
    (-(v * v) / (2.0 * dist)).clamp(ACCEL_MIN, 0.0)
}

impl Controller for LaneFollow {
    fn name(&self) -> &str {
        "lane-follow"
    }

    fn plan_tick(&mut self, view: &WorldView<'_>, perception: &PerceptionFrame) -> Plan {
        let net = view.network;
        let ego = view.ego;
        let r = ego.lane_ref;
        if self.merge_target == Some(r.lane) {
            self.merge_target = None;
        }
        let Some(lane) = net.lane(r.lane) else {
            let command = ControlCommand::new(-6.0, 0.0);
            return Plan {
                command,
                path: predict_default(ego, command),
                flags: vec![],
                target_lane: r.lane,
            };
        };
        let v = ego.v;
        let d_stop = stopping_distance(v);
        let mut flags = Vec::new();
        let mut latched = Vec::new();
        let mut stop_gap: Option<f64> = None;
        let mut shift = None;
        let mut v_target = view.v_ref;

        for hz in self.scan(view, lane) {
            match hz.kind {
                HazardKind::Lead { speed } => v_target = v_target.min(follow_speed(hz.gap, speed)),
                HazardKind::Passable { shift: sh } => {
                    if shift.is_none() && hz.gap <= d_stop + 10.0 {
                        shift = Some(sh);
                    }
                }
                HazardKind::Blocking | HazardKind::Narrow { .. } => {
                    let latch = Latch::Object(hz.id);
                    if hz.gap <= d_stop || self.latched.contains(&latch) {
                        latched.push(latch);
                        stop_gap = Some(stop_gap.map_or(hz.gap, |g: f64| g.min(hz.gap)));
                        flags.push(match hz.kind {
                            HazardKind::Narrow { free_width, solid } => {
                                ConflictFlag::EvasionNeedsOppositeLane {
                                    obstacle: hz.id,
                                    gap: hz.gap,
                                    free_width,
                                    solid,
                                }
                            }
                            _ => ConflictFlag::LaneBlocked {
                                obstacle: hz.id,
                                gap: hz.gap,
                            },
                        });
                    }
                }
            }
        }

        if lane.is_merge_lane() && self.merge_target.is_none() {
            if let Some(end) = lane.merge_end_s() {
                let remaining = end - (r.s + FRONT_OVERHANG);
                let run = (3.0 * v).max(40.0);
                let target = net.neighbor(r.lane, Side::Left).filter(|_| {
                    net.can_cross(r.lane, Side::Left, r.s)
                        && net.can_cross(r.lane, Side::Left, r.s + run)
                });
                match target {
                    Some(t) if Self::gap_accepted(view, t) => self.merge_target = Some(t),
                    _ if remaining <= d_stop || self.latched.contains(&Latch::Merge) => {
                        latched.push(Latch::Merge);
                        stop_gap = Some(stop_gap.map_or(remaining, |g: f64| g.min(remaining)));
                        flags.push(ConflictFlag::MergeInfeasible { remaining });
                    }
                    _ => {}
                }
            }
        }
        self.latched = latched;

        let mut accel = speed_control(v, v_target);
        if let Some(gap) = stop_gap {
            accel = accel.min(stop_accel(v, gap - STOP_MARGIN));
        }
        let target_lane = self.merge_target.unwrap_or(r.lane);
        let shift = if target_lane == r.lane {
            shift.unwrap_or(0.0)
        } else {
            0.0
        };
        let steer = lane_keep_steer(
            net,
            ego,
            target_lane,
            shift,
            r.d - perception.lateral_offset_meas,
        );
        let command = ControlCommand::new(accel, steer);
        Plan {
            command,
            path: predict_default(ego, command),
            flags,
            target_lane,
        }
    }
}
