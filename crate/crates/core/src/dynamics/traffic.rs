use rand::Rng;
use serde::Serialize;

use super::collision::{Footprint, ObjectId, ObjectKind};
use super::{VEHICLE_LENGTH, VEHICLE_WIDTH};
use crate::geom::Vec2;
use crate::roadnet::{LaneId, RoadNetwork};
use crate::scenario::TrafficDecl;

pub const PEDESTRIAN_SIZE: f64 = 0.5;
pub const PEDESTRIAN_SPEED: f64 = 1.4;
/// Lateral speed while settling into a lane after a cut-in, m/s.
const SETTLE_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Vehicle,
    Pedestrian,
}

/// Lane-bound actor moving at constant speed; `(s, d)` along its lane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficActor {
    pub id: ObjectId,
    pub lane: LaneId,
    pub s: f64,
    pub d: f64,
    pub speed: f64,
    /// Scripted lane entry: time and target lane.
    pub cut_in: Option<(f64, LaneId)>,
}

impl TrafficActor {
    pub fn kind(&self) -> ActorKind {
        match self.id.kind {
            ObjectKind::Pedestrian => ActorKind::Pedestrian,
            _ => ActorKind::Vehicle,
        }
    }

    pub fn size(&self) -> (f64, f64) {
        match self.kind() {
            ActorKind::Vehicle => (VEHICLE_LENGTH, VEHICLE_WIDTH),
            ActorKind::Pedestrian => (PEDESTRIAN_SIZE, PEDESTRIAN_SIZE),
        }
    }

    pub fn position(&self, net: &RoadNetwork) -> Vec2 {
        net.lane(self.lane)
            .map(|l| l.offset_point(self.s, self.d))
            .unwrap_or_default()
    }

    pub fn heading(&self, net: &RoadNetwork) -> f64 {
        net.lane(self.lane)
            .map(|l| l.heading_at(self.s))
            .unwrap_or(0.0)
    }

    pub fn footprint(&self, net: &RoadNetwork) -> Footprint {
        let (length, width) = self.size();
        Footprint::new(
            self.id,
            self.position(net),
            self.heading(net),
            length,
            width,
        )
    }
}

/// Places vehicles in a column from `s0` at `spacing` (round-robin over
/// lanes when no lane is given) and pedestrians uniformly over the map.
pub fn spawn_traffic<R: Rng>(
    decl: &TrafficDecl,
    net: &RoadNetwork,
    rng: &mut R,
) -> Vec<TrafficActor> {
    let mut out = Vec::new();
    let lanes: Vec<LaneId> = match decl.lane {
        Some(l) => vec![l],
        None => net.lanes().iter().map(|l| l.id()).collect(),
    };
    if lanes.is_empty() {
        return out;
    }
    let jitter = decl
        .jitter
        .min(((decl.spacing - VEHICLE_LENGTH - 1.0) / 2.0).max(0.0));
    for i in 0..decl.vehicles {
        let lane = lanes[i as usize % lanes.len()];
        let slot = (i as usize / lanes.len()) as f64;
        let offset: f64 = if jitter > 0.0 {
            rng.gen_range(-jitter..=jitter)
        } else {
            0.0
        };
        let Some(spec) = net.lane(lane) else { continue };
        let s = (decl.s0 + slot * decl.spacing + offset).max(0.0);
        let (lane, s) = if s > spec.length() {
            net.advance(lane, 0.0, s)
        } else {
            (lane, s)
        };
        if net
            .lane(lane)
            .is_some_and(|l| s >= l.length() && l.successor().is_none())
        {
            continue;
        }
        let cut_in = decl
            .cut_ins
            .iter()
            .find(|c| c.vehicle == i)
            .map(|c| (c.t, c.lane));
        out.push(TrafficActor {
            id: ObjectId::vehicle(i),
            lane,
            s,
            d: 0.0,
            speed: decl.speed,
            cut_in,
        });
    }
    let all: Vec<_> = net.lanes().iter().map(|l| (l.id(), l.length())).collect();
    for i in 0..decl.pedestrians {
        let (lane, len) = all[rng.gen_range(0..all.len())];
        let s = rng.gen_range(0.0..len.max(f64::MIN_POSITIVE));
        out.push(TrafficActor {
            id: ObjectId::pedestrian(i),
            lane,
            s,
            d: 0.0,
            speed: PEDESTRIAN_SPEED,
            cut_in: None,
        });
    }
    out
}

/// Advances every actor by one step at time `t`. Scripted lane entries take
/// effect on the first step with `t ≥` their time. Actors running off a
/// dead end are removed.
pub fn step_traffic(
    actors: &[TrafficActor],
    net: &RoadNetwork,
    t: f64,
    dt: f64,
) -> Vec<TrafficActor> {
    let mut out = Vec::with_capacity(actors.len());
    for a in actors {
        let mut a = a.clone();
        if let Some((at, lane)) = a.cut_in {
            if t + 1e-9 >= at {
                if let Some(spec) = net.lane(lane) {
                    let p = spec.project(a.position(net));
                    a.lane = lane;
                    a.s = p.s;
                    a.d = p.d;
                }
                a.cut_in = None;
            }
        }
        let settle = SETTLE_RATE * dt;
        a.d = if a.d.abs() <= settle {
            0.0
        } else {
            a.d - settle * a.d.signum()
        };
        let (lane, s) = net.advance(a.lane, a.s, a.speed * dt);
        let dead_end = net
            .lane(lane)
            .is_none_or(|l| s >= l.length() && l.successor().is_none());
        if dead_end && a.speed > 0.0 {
            continue;
        }
        a.lane = lane;
        a.s = s;
        out.push(a);
    }
    out
}
