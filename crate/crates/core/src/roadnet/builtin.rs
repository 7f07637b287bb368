//! Built-in maps.
//!
//! `town-loop` is a stadium-shaped two-lane loop (700 m straights, 60 m
//! road-center radius). Lane 0 runs counter-clockwise on the outside, lane 1
//! clockwise on the inside. Lane 0 carries a worn zone, a heavily worn zone and
//! a 150 m stretch with no markings starting 450 m past `start_a`, which at
//! 15 m/s puts the marking loss about 30 s ahead of the spawn.
//!
//! `highway-onramp` is a straight two-lane carriageway with a parallel
//! acceleration lane on the right. The ramp is separated by a solid line at
//! its start, allows merging over a dashed window and ends in a solid stretch.

use std::f64::consts::PI;

use super::{
    Adjacency, LaneBuilder, LaneId, LaneSpec, MarkingKind, MarkingSegment, RoadError, RoadNetwork,
    SpawnPoint,
};
use crate::geom::Vec2;

pub const BUILTIN_MAPS: &[&str] = &["town-loop", "highway-onramp"];

pub const LANE_WIDTH: f64 = 3.5;

const LOOP_STRAIGHT: f64 = 700.0;
const LOOP_RADIUS: f64 = 60.0;
const ARC_SEGMENTS: usize = 96;

/// Arc length of `start_a` on lane 0.
pub const TOWN_START_A_S: f64 = 10.0;
/// Distance from `start_a` to the first unmarked segment on lane 0.
pub const TOWN_MARKING_LOSS_AHEAD: f64 = 450.0;
const TOWN_MARKING_LOSS_LEN: f64 = 150.0;

pub const RAMP_LENGTH: f64 = 400.0;
const RAMP_X0: f64 = 200.0;
const RAMP_DASHED: (f64, f64) = (150.0, 330.0);
const HIGHWAY_LENGTH: f64 = 3000.0;

pub fn build_builtin_map(name: &str) -> Result<RoadNetwork, RoadError> {
    match name {
        "town-loop" => Ok(town_loop()),
        "highway-onramp" => Ok(highway_onramp()),
        _ => Err(RoadError::UnknownMap {
            name: name.to_string(),
            valid: BUILTIN_MAPS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

fn seg(a: f64, b: f64, kind: MarkingKind, q: f64) -> MarkingSegment {
    MarkingSegment::new(a, b, kind, q)
}

fn arc(center: Vec2, radius: f64, from: f64, to: f64, out: &mut Vec<Vec2>) {
    for k in 1..=ARC_SEGMENTS {
        let a = from + (to - from) * k as f64 / ARC_SEGMENTS as f64;
        out.push(center + Vec2::from_angle(a) * radius);
    }
}

fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Splits `[0, len]` into marking segments from sorted `(start, end, kind, q)`
/// overrides, filling the rest with `base`.
fn staircase(
    len: f64,
    base: MarkingKind,
    overrides: &[(f64, f64, MarkingKind, f64)],
) -> Vec<MarkingSegment> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for &(a, b, kind, q) in overrides {
        if a > cursor {
            out.push(seg(cursor, a, base, 1.0));
        }
        out.push(seg(a, b, kind, q));
        cursor = b;
    }
    if cursor < len {
        out.push(seg(cursor, len, base, 1.0));
    }
    out
}

fn town_loop() -> RoadNetwork {
    let c_right = Vec2::new(LOOP_STRAIGHT, 0.0);
    let c_left = Vec2::new(0.0, 0.0);

    // lane 0: counter-clockwise, outer
    let r0 = LOOP_RADIUS + LANE_WIDTH / 2.0;
    let mut outer = vec![Vec2::new(0.0, -r0), Vec2::new(LOOP_STRAIGHT, -r0)];
    arc(c_right, r0, -PI / 2.0, PI / 2.0, &mut outer);
    outer.push(Vec2::new(0.0, r0));
    arc(c_left, r0, PI / 2.0, 1.5 * PI, &mut outer);
    let len0 = polyline_length(&outer);
    let top0 = LOOP_STRAIGHT + polyline_length(&outer[1..ARC_SEGMENTS + 2]);

    let loss = TOWN_START_A_S + TOWN_MARKING_LOSS_AHEAD;
    let worn = [(160.0, 310.0, 0.7), (410.0, loss, 0.5)];
    let zones = |kind: MarkingKind| {
        let mut v: Vec<(f64, f64, MarkingKind, f64)> =
            worn.iter().map(|&(a, b, q)| (a, b, kind, q)).collect();
        v.push((loss, loss + TOWN_MARKING_LOSS_LEN, MarkingKind::None, 0.0));
        v
    };
    let lane0 = LaneBuilder {
        id: LaneId(0),
        centerline: outer,
        width: LANE_WIDTH,
        left_marking: staircase(len0, MarkingKind::Dashed, &zones(MarkingKind::Dashed)),
        right_marking: staircase(len0, MarkingKind::Solid, &zones(MarkingKind::Solid)),
        successor: Some(LaneId(0)),
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .expect("town-loop lane 0");

    // lane 1: clockwise, inner
    let r1 = LOOP_RADIUS - LANE_WIDTH / 2.0;
    let mut inner = vec![Vec2::new(0.0, r1), Vec2::new(LOOP_STRAIGHT, r1)];
    arc(c_right, r1, PI / 2.0, -PI / 2.0, &mut inner);
    inner.push(Vec2::new(0.0, -r1));
    arc(c_left, r1, -PI / 2.0, -1.5 * PI, &mut inner);
    let len1 = polyline_length(&inner);
    let bottom1 = LOOP_STRAIGHT + polyline_length(&inner[1..ARC_SEGMENTS + 2]);
    // same physical stretch as lane 0's unmarked zone, seen from the other direction
    let x_to_s1 = |x: f64| bottom1 + (LOOP_STRAIGHT - x);
    let gap1 = [(
        x_to_s1(loss + TOWN_MARKING_LOSS_LEN),
        x_to_s1(loss),
        MarkingKind::None,
        0.0,
    )];
    let lane1 = LaneBuilder {
        id: LaneId(1),
        centerline: inner,
        width: LANE_WIDTH,
        left_marking: staircase(len1, MarkingKind::Dashed, &gap1),
        right_marking: staircase(len1, MarkingKind::Solid, &gap1),
        successor: Some(LaneId(1)),
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .expect("town-loop lane 1");

    let spawn = |name: &str, lane: &LaneSpec, s: f64| {
        let p = lane.point_at(s);
        SpawnPoint {
            name: name.to_string(),
            lane: lane.id(),
            x: p.x,
            y: p.y,
            theta: lane.heading_at(s),
        }
    };
    let spawns = vec![
        spawn("start_a", &lane0, TOWN_START_A_S),
        spawn("start_b", &lane0, top0 + 10.0),
        spawn("start_c", &lane1, 10.0),
    ];
    let adjacency = vec![
        Adjacency {
            left: Some(LaneId(1)),
            right: None,
        },
        Adjacency {
            left: Some(LaneId(0)),
            right: None,
        },
    ];
    RoadNetwork::new("town-loop", vec![lane0, lane1], adjacency, spawns).expect("town-loop network")
}

fn highway_onramp() -> RoadNetwork {
    let straight = |y: f64, x0: f64, x1: f64| vec![Vec2::new(x0, y), Vec2::new(x1, y)];
    let ramp_x1 = RAMP_X0 + RAMP_LENGTH;
    let lane0 = LaneBuilder {
        id: LaneId(0),
        centerline: straight(LANE_WIDTH, 0.0, HIGHWAY_LENGTH),
        width: LANE_WIDTH,
        left_marking: vec![seg(0.0, HIGHWAY_LENGTH, MarkingKind::Solid, 1.0)],
        right_marking: vec![seg(0.0, HIGHWAY_LENGTH, MarkingKind::Dashed, 1.0)],
        successor: None,
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .expect("highway lane 0");
    let lane1 = LaneBuilder {
        id: LaneId(1),
        centerline: straight(0.0, 0.0, HIGHWAY_LENGTH),
        width: LANE_WIDTH,
        left_marking: vec![seg(0.0, HIGHWAY_LENGTH, MarkingKind::Dashed, 1.0)],
        right_marking: staircase(
            HIGHWAY_LENGTH,
            MarkingKind::Solid,
            &[(
                RAMP_X0 + RAMP_DASHED.0,
                RAMP_X0 + RAMP_DASHED.1,
                MarkingKind::Dashed,
                1.0,
            )],
        ),
        successor: None,
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .expect("highway lane 1");
    let ramp = LaneBuilder {
        id: LaneId(2),
        centerline: straight(-LANE_WIDTH, RAMP_X0, ramp_x1),
        width: LANE_WIDTH,
        left_marking: staircase(
            RAMP_LENGTH,
            MarkingKind::Solid,
            &[(RAMP_DASHED.0, RAMP_DASHED.1, MarkingKind::Dashed, 1.0)],
        ),
        right_marking: vec![seg(0.0, RAMP_LENGTH, MarkingKind::Solid, 1.0)],
        successor: None,
        is_merge_lane: true,
        merge_end_s: Some(RAMP_LENGTH),
    }
    .build()
    .expect("highway ramp");
    let spawns = vec![
        SpawnPoint {
            name: "hw_start".into(),
            lane: LaneId(1),
            x: 50.0,
            y: 0.0,
            theta: 0.0,
        },
        SpawnPoint {
            name: "ramp_start".into(),
            lane: LaneId(2),
            x: RAMP_X0 + 5.0,
            y: -LANE_WIDTH,
            theta: 0.0,
        },
    ];
    let adjacency = vec![
        Adjacency {
            left: None,
            right: Some(LaneId(1)),
        },
        Adjacency {
            left: Some(LaneId(0)),
            right: Some(LaneId(2)),
        },
        Adjacency {
            left: Some(LaneId(1)),
            right: None,
        },
    ];
    RoadNetwork::new(
        "highway-onramp",
        vec![lane0, lane1, ramp],
        adjacency,
        spawns,
    )
    .expect("highway network")
}

/// Start of the solid stretch at the end of the ramp, in ramp arc length.
pub fn ramp_merge_region() -> (f64, f64) {
    (RAMP_DASHED.1, RAMP_LENGTH)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::Side;

    #[test]
    fn town_loop_marking_loss_ahead_of_start_a() {
        let net = build_builtin_map("town-loop").unwrap();
        let start = net.spawn("start_a").unwrap();
        let lane = net.lane(start.lane).unwrap();
        let s0 = lane.project(start.position()).s;
        assert!(lane.length() >= 1500.0);
        let zero = lane
            .markings(Side::Left)
            .iter()
            .find(|m| m.quality == 0.0)
            .expect("unmarked segment");
        assert!((zero.s_start - s0 - 450.0).abs() < 1e-9);
        assert_eq!(zero.kind, MarkingKind::None);
        assert_eq!(
            lane.marking_at(Side::Right, zero.s_start + 1.0).quality,
            0.0
        );
    }

    #[test]
    fn highway_merge_region_is_solid() {
        let net = build_builtin_map("highway-onramp").unwrap();
        let ramp = net.lanes().iter().find(|l| l.is_merge_lane()).unwrap();
        assert_eq!(ramp.merge_end_s(), Some(RAMP_LENGTH));
        let (a, b) = ramp_merge_region();
        let carriageway = net.neighbor(ramp.id(), Side::Left).unwrap();
        let lane1 = net.lane(carriageway).unwrap();
        let mut s = a;
        while s < b {
            assert_eq!(ramp.marking_at(Side::Left, s).kind, MarkingKind::Solid);
            let x = ramp.point_at(s).x;
            let s1 = lane1.project(Vec2::new(x, 0.0)).s;
            assert_eq!(lane1.marking_at(Side::Right, s1).kind, MarkingKind::Solid);
            s += 1.0;
        }
        assert!(net.can_cross(ramp.id(), Side::Left, 200.0));
        assert!(!net.can_cross(ramp.id(), Side::Left, 50.0));
    }

    #[test]
    fn unknown_map_lists_names() {
        let err = build_builtin_map("nosuchmap").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("town-loop") && msg.contains("highway-onramp"),
            "{msg}"
        );
    }

    #[test]
    fn loop_closes() {
        let net = build_builtin_map("town-loop").unwrap();
        for lane in net.lanes() {
            let pts = lane.centerline();
            assert!(pts[0].distance(*pts.last().unwrap()) < 1e-9);
            assert_eq!(lane.successor(), Some(lane.id()));
        }
    }
}
