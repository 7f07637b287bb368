use proptest::prelude::*;

use conflictsim_core::conflicts::{
    apply_injections, conflict_monitor, registered_ids, InjectionAction, InjectionEvent,
    InjectionSchedule, Trigger, WorldConditions,
};
use conflictsim_core::control::ConflictFlag;
use conflictsim_core::dynamics::ObjectId;
use conflictsim_core::perception::PerceptionFrame;
use conflictsim_core::roadnet::LaneId;
use conflictsim_core::scenario::{Blocking, ObstacleDecl};

fn action(kind: u8, x: f64) -> InjectionAction {
    match kind % 4 {
        0 => InjectionAction::SetSensorNoise { sigma: x },
        1 => InjectionAction::SetSensorFailed { failed: x > 0.5 },
        2 => InjectionAction::SetWeather {
            id: (x * 8.0) as u32,
        },
        _ => InjectionAction::SpawnObstacle(ObstacleDecl::new(
            LaneId(0),
            100.0 + x * 50.0,
            0.0,
            0.0,
            4.5,
            2.0,
            Blocking::Full,
        )),
    }
}

fn arb_events() -> impl Strategy<Value = Vec<InjectionEvent>> {
    prop::collection::btree_set(1u32..200, 1..8).prop_flat_map(|values| {
        let n = values.len();
        (
            Just(values),
            prop::collection::vec((any::<bool>(), any::<u8>(), 0.0f64..1.0), n),
        )
            .prop_map(|(values, parts)| {
                values
                    .into_iter()
                    .zip(parts)
                    .map(|(v, (by_time, kind, x))| {
                        // distinct trigger values; time in tenths of a second, distance in meters
                        let trigger = if by_time {
                            Trigger::Time(v as f64 / 10.0)
                        } else {
                            Trigger::Distance(v as f64 + 0.5)
                        };
                        InjectionEvent::new(trigger, action(kind, x))
                    })
                    .collect()
            })
    })
}

fn replay(events: Vec<InjectionEvent>) -> Vec<WorldConditions> {
    let mut world = WorldConditions::new(0.0, 0, vec![]);
    let mut schedule = InjectionSchedule::new(events);
    (0..500)
        .map(|k| {
            let t = k as f64 * 0.05;
            apply_injections(&mut world, &mut schedule, t, 15.0 * t);
            world.clone()
        })
        .collect()
}

proptest! {
    #[test]
    fn injection_order_does_not_matter(events in arb_events(), rotate in 0usize..8) {
        let mut shuffled = events.clone();
        shuffled.reverse();
        let r = rotate % shuffled.len();
        shuffled.rotate_left(r);
        prop_assert_eq!(replay(events), replay(shuffled));
    }

    #[test]
    fn repeated_events_change_nothing(events in arb_events()) {
        let doubled: Vec<_> = events.iter().chain(events.iter()).cloned().collect();
        prop_assert_eq!(replay(events), replay(doubled));
    }

    #[test]
    fn monitor_reports_registered_ids(conf in 0.0f64..1.0, failed in any::<bool>(), flags in prop::collection::vec(0u8..3, 0..4)) {
        let world = WorldConditions::new(0.0, 0, vec![]);
        let frame = PerceptionFrame { t: 1.0, confidence: conf, confidence_raw: conf, lateral_offset_meas: 0.0, sensor_failed: failed };
        let flags: Vec<ConflictFlag> = flags
            .into_iter()
            .map(|f| match f {
                0 => ConflictFlag::LaneBlocked { obstacle: ObjectId::obstacle(0), gap: 10.0 },
                1 => ConflictFlag::EvasionNeedsOppositeLane { obstacle: ObjectId::obstacle(0), gap: 10.0, free_width: 1.0, solid: true },
                _ => ConflictFlag::MergeInfeasible { remaining: 20.0 },
            })
            .collect();
        let active = conflict_monitor(&world, &frame, &flags, 0.35);
        let expected_any = failed || conf < 0.35 || !flags.is_empty();
        prop_assert_eq!(active.is_some(), expected_any);
        if let Some(a) = active {
            prop_assert!(registered_ids().contains(&a.id));
            // all five rows are urgency 3, so the lowest raised id wins
            let mut raised = Vec::new();
            if failed { raised.push(2); }
            if conf < 0.35 { raised.push(10); }
            for f in &flags {
                raised.push(match f {
                    ConflictFlag::LaneBlocked { .. } => 9,
                    ConflictFlag::EvasionNeedsOppositeLane { .. } => 7,
                    ConflictFlag::MergeInfeasible { .. } => 5,
                });
            }
            prop_assert_eq!(Some(a.id), raised.into_iter().min());
        }
    }
}
