mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use conflictsim_core::geom::Vec2;
use conflictsim_core::roadnet::{
    network_from_str, network_to_string, Adjacency, LaneBuilder, LaneId, MarkingKind,
    MarkingSegment, RoadNetwork, Side, SpawnPoint,
};

fn quarter_circle(r: f64, segments: usize) -> RoadNetwork {
    let pts: Vec<Vec2> = (0..=segments)
        .map(|i| {
            let a = FRAC_PI_2 * i as f64 / segments as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let len: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
    let lane = LaneBuilder {
        id: LaneId(0),
        centerline: pts,
        width: 3.5,
        left_marking: common::dashed(len),
        right_marking: common::dashed(len),
        successor: None,
        is_merge_lane: false,
        merge_end_s: None,
    }
    .build()
    .unwrap();
    RoadNetwork::new("quarter", vec![lane], vec![Adjacency::default()], vec![]).unwrap()
}

/// Nearest of `n` points sampled on the true arc; returns (s, d).
fn brute_force(r: f64, p: Vec2, n: usize) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let a = FRAC_PI_2 * i as f64 / n as f64;
        let q = Vec2::new(r * a.cos(), r * a.sin());
        let dist = p.distance(q);
        if dist < best.0 {
            best = (dist, a);
        }
    }
    let d = if p.norm() < r { best.0 } else { -best.0 };
    (r * best.1, d)
}

#[test]
fn quarter_circle_matches_dense_sampling() {
    let r = 50.0;
    let net = quarter_circle(r, 2000);
    let lane = &net.lanes()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut points = vec![Vec2::new(51.0 * FRAC_PI_4.cos(), 51.0 * FRAC_PI_4.sin())];
    for _ in 0..50 {
        let phi = rng.gen_range(0.05..FRAC_PI_2 - 0.05);
        let rho = rng.gen_range(r - 1.5..r + 1.5);
        points.push(Vec2::new(rho * phi.cos(), rho * phi.sin()));
    }
    for p in points {
        let (s, d) = brute_force(r, p, 100_000);
        let proj = lane.project(p);
        assert!(
            (proj.s - s).abs() < 1e-3 && (proj.d - d).abs() < 1e-3,
            "{p:?}: {proj:?} vs ({s}, {d})"
        );
    }
    let first = lane.project(Vec2::new(51.0 * FRAC_PI_4.cos(), 51.0 * FRAC_PI_4.sin()));
    assert!((first.s - r * FRAC_PI_4).abs() < 1e-3 && (first.d + 1.0).abs() < 1e-3);
}

#[test]
fn quarter_circle_projection_matches_polar_form() {
    let r = 50.0;
    let net = quarter_circle(r, 2000);
    let lane = &net.lanes()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let phi = rng.gen_range(0.01..FRAC_PI_2 - 0.01);
        let rho = rng.gen_range(r - 1.75..r + 1.75);
        let p = Vec2::new(rho * phi.cos(), rho * phi.sin());
        let proj = lane.project(p);
        // counter-clockwise travel puts the center on the left
        worst.0 = worst.0.max((proj.s - r * phi).abs());
        worst.1 = worst.1.max((proj.d - (r - rho)).abs());
    }
    assert!(worst.0 < 1e-3, "s error {}", worst.0);
    assert!(worst.1 < 1e-3, "d error {}", worst.1);
}

#[test]
fn offset_point_inverts_projection() {
    let net = quarter_circle(30.0, 200);
    let lane = &net.lanes()[0];
    for i in 1..100 {
        let s = lane.length() * i as f64 / 100.0;
        for d in [-1.5, 0.0, 1.5] {
            let proj = lane.project(lane.offset_point(s, d));
            // off the centerline the inverse is exact only away from vertices
            let tol = 1e-9 + d.abs() * FRAC_PI_2 / 200.0;
            assert!(
                (proj.s - s).abs() < tol && (proj.d - d).abs() < tol,
                "s={s} d={d} -> {proj:?}"
            );
        }
    }
}

fn markings(cuts: &[f64], kinds: &[(u8, f64)], len: f64) -> Vec<MarkingSegment> {
    let mut edges = vec![0.0];
    let mut sorted: Vec<f64> = cuts
        .iter()
        .map(|c| c * len)
        .filter(|c| *c > 1.0 && *c < len - 1.0)
        .collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < 1.0);
    edges.extend(sorted);
    edges.push(len);
    edges
        .windows(2)
        .zip(kinds.iter().cycle())
        .map(|(w, &(k, q))| match k % 3 {
            0 => MarkingSegment::new(w[0], w[1], MarkingKind::Solid, q),
            1 => MarkingSegment::new(w[0], w[1], MarkingKind::Dashed, q),
            _ => MarkingSegment::new(w[0], w[1], MarkingKind::None, 0.0),
        })
        .collect()
}

prop_compose! {
    fn arb_network()(
        lanes in 1usize..4,
        len in 50.0f64..500.0,
        bend in -0.3f64..0.3,
        cuts in prop::collection::vec(0.0f64..1.0, 0..6),
        kinds in prop::collection::vec((0u8..3, 0.0f64..=1.0), 1..6),
    ) -> RoadNetwork {
        let specs = (0..lanes)
            .map(|i| {
                let y = 3.5 * i as f64;
                let centerline = vec![
                    Vec2::new(0.0, y),
                    Vec2::new(len / 2.0, y + bend * len / 4.0),
                    Vec2::new(len, y),
                ];
                let l: f64 = centerline.windows(2).map(|w| w[0].distance(w[1])).sum();
                LaneBuilder {
                    id: LaneId(i as u32),
                    centerline,
                    width: 3.5,
                    left_marking: markings(&cuts, &kinds, l),
                    right_marking: markings(&cuts, &kinds[1..].iter().chain(&kinds[..1]).copied().collect::<Vec<_>>(), l),
                    successor: None,
                    is_merge_lane: false,
                    merge_end_s: None,
                }
                .build()
                .unwrap()
            })
            .collect();
        let adjacency = (0..lanes)
            .map(|i| Adjacency {
                left: (i + 1 < lanes).then(|| LaneId(i as u32 + 1)),
                right: (i > 0).then(|| LaneId(i as u32 - 1)),
            })
            .collect();
        let spawn = SpawnPoint { name: "s0".into(), lane: LaneId(0), x: 1.0, y: 0.0, theta: 0.0 };
        RoadNetwork::new("random", specs, adjacency, vec![spawn]).unwrap()
    }
}

proptest! {
    #[test]
    fn network_file_round_trips(net in arb_network()) {
        let text = network_to_string(&net);
        let back = network_from_str(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(network_to_string(&back), text);
    }

    #[test]
    fn window_quality_is_additive_and_bounded(net in arb_network(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let lane = &net.lanes()[0];
        let mut w = [a * lane.length(), b * lane.length(), c * lane.length()];
        w.sort_by(f64::total_cmp);
        prop_assume!(w[1] - w[0] > 1e-6 && w[2] - w[1] > 1e-6);
        for side in [Side::Left, Side::Right] {
            let q = |x: f64, y: f64| net.quality_ahead(lane.id(), side, x, y);
            let whole = q(w[0], w[2]) * (w[2] - w[0]);
            let parts = q(w[0], w[1]) * (w[1] - w[0]) + q(w[1], w[2]) * (w[2] - w[1]);
            prop_assert!((whole - parts).abs() < 1e-6, "{whole} vs {parts}");
            let segs = lane.markings(side);
            let lo = segs.iter().map(|m| m.quality).fold(1.0, f64::min);
            let hi = segs.iter().map(|m| m.quality).fold(0.0, f64::max);
            let v = q(w[0], w[2]);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn only_dashed_markings_are_crossable(net in arb_network(), f in 0.0f64..1.0) {
        for lane in net.lanes() {
            let s = f * lane.length();
            for side in [Side::Left, Side::Right] {
                let expect = net.neighbor(lane.id(), side).is_some() && lane.marking_at(side, s).kind == MarkingKind::Dashed;
                prop_assert_eq!(net.can_cross(lane.id(), side, s), expect);
            }
        }
    }
}

#[test]
fn worn_window_is_monotone_on_the_town_loop() {
    // quality only falls as the window slides from intact into unmarked road
    let net = conflictsim_core::roadnet::build_builtin_map("town-loop").unwrap();
    let start = conflictsim_core::roadnet::TOWN_START_A_S;
    let loss = start + conflictsim_core::roadnet::TOWN_MARKING_LOSS_AHEAD;
    let q = |s: f64| net.quality_ahead(LaneId(0), Side::Left, s, s + 20.0);
    let mut prev = q(loss - 40.0);
    for i in 0..=40 {
        let v = q(loss - 40.0 + i as f64);
        assert!(v <= prev + 1e-12, "quality rose at {i}");
        prev = v;
    }
    assert_eq!(q(loss), 0.0);
}
