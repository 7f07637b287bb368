mod common;

use conflictsim_core::control::ControllerRegistry;
use conflictsim_core::engine::{
    run_episode, summarize, EndReason, Episode, EpisodeConfig, EpisodeLog, LogEvent,
    OperatorScript, ScriptWhen,
};
use conflictsim_core::roadnet::MarkingKind;
use conflictsim_core::scenario::{catalog_scenario, BuiltinMaps, TrafficDecl, CATALOG_NAMES};
use conflictsim_core::supervisor::{ManualControl, Mode, OperatorInput};

fn events(log: &EpisodeLog) -> Vec<&LogEvent> {
    log.events().map(|e| &e.event).collect()
}

#[test]
fn equal_seeds_give_identical_logs() {
    for name in CATALOG_NAMES {
        let a = common::run_catalog(name, 17, &OperatorScript::silent()).to_jsonl();
        let b = common::run_catalog(name, 17, &OperatorScript::silent()).to_jsonl();
        assert!(a == b, "{name} differs between runs");
        let back = EpisodeLog::parse_jsonl(&a).unwrap();
        assert_eq!(back.to_jsonl(), a);
        assert_eq!(back.summary(), Some(&summarize(&back)));
    }
}

#[test]
fn seeds_change_noisy_perception_and_traffic() {
    let mut spec = catalog_scenario("vanishing-markings").unwrap();
    spec.sensor_noise_sigma = 0.2;
    let raw = |seed| {
        let log = run_episode(
            EpisodeConfig::new(spec.clone()).with_seed(seed),
            &OperatorScript::silent(),
        )
        .unwrap();
        log.ticks().map(|r| r.conf_raw).collect::<Vec<_>>()
    };
    assert_ne!(raw(1), raw(2));
    assert_eq!(raw(3), raw(3));
    let positions = |seed| {
        let ep = common::catalog_episode("onramp-blocked", seed);
        ep.actors().iter().map(|a| a.s).collect::<Vec<_>>()
    };
    assert_ne!(positions(1), positions(2));
}

#[test]
fn random_spawn_is_seeded() {
    let spec = catalog_scenario("onramp-blocked").unwrap();
    let start = |seed| {
        let mut cfg = EpisodeConfig::new(spec.clone()).with_seed(seed);
        cfg.randomize_spawn = true;
        let ep = Episode::new(cfg, &BuiltinMaps, &ControllerRegistry::with_builtins()).unwrap();
        ep.ego().lane_ref.lane
    };
    let lanes: Vec<_> = (0..20).map(start).collect();
    assert_eq!(lanes, (0..20).map(start).collect::<Vec<_>>());
    assert!(lanes.windows(2).any(|w| w[0] != w[1]), "spawn never varied");
}

#[test]
fn automated_lane_changes_cross_dashed_only() {
    let mut merged = catalog_scenario("onramp-blocked").unwrap();
    merged.conflict = None;
    merged.traffic = TrafficDecl::default();
    let mut logs: Vec<EpisodeLog> = CATALOG_NAMES
        .iter()
        .map(|n| common::run_catalog(n, 0, &OperatorScript::silent()))
        .collect();
    let free = run_episode(EpisodeConfig::new(merged), &OperatorScript::silent()).unwrap();
    let changes: Vec<_> = events(&free)
        .into_iter()
        .filter(|e| matches!(e, LogEvent::LaneChange { .. }))
        .cloned()
        .collect();
    assert_eq!(changes.len(), 1, "{changes:?}");
    assert!(!events(&free)
        .iter()
        .any(|e| matches!(e, LogEvent::TorIssued { .. })));
    assert_eq!(free.end_reason(), Some(EndReason::Destination));
    logs.push(free);
    for log in &logs {
        for e in events(log) {
            if let LogEvent::LaneChange { crossing, mode, .. } = e {
                if mode.is_automated() {
                    assert_eq!(
                        *crossing,
                        MarkingKind::Dashed,
                        "{}: {e:?}",
                        log.header().scenario
                    );
                }
            }
        }
    }
}

#[test]
fn scripted_ack_records_reaction_time() {
    let log = common::run_catalog("danger-zone", 0, &OperatorScript::ack_after(2.0));
    let s = log.summary().unwrap();
    assert_eq!((s.tor_count, s.takeovers, s.missed), (1, 1, 0));
    assert!((s.reaction_times[0] - 2.0).abs() < 1e-9);
}

#[test]
fn coasting_manual_driver_hits_the_blocker() {
    // acknowledged but never steered: neutral command, constant speed
    let log = common::run_catalog("danger-zone", 0, &OperatorScript::ack_after(0.5));
    assert_eq!(log.end_reason(), Some(EndReason::Collision));
    let hits: Vec<_> = events(&log)
        .into_iter()
        .filter_map(|e| match e {
            LogEvent::Collision { with } => Some(with.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(hits, vec!["obstacle-0".to_string()]);
    assert_eq!(log.summary().unwrap().collisions, 1);
    assert_eq!(log.ticks().last().unwrap().mode, Mode::Manual);
}

#[test]
fn manual_braking_then_resume_is_refused_while_blocked() {
    let script = OperatorScript::ack_after(0.5)
        .with(
            ScriptWhen::AfterTor { after_tor: 0.6 },
            OperatorInput::Control(ManualControl {
                steer: 0.0,
                throttle: 0.0,
                brake: 1.0,
            }),
        )
        .with(
            ScriptWhen::AfterTor { after_tor: 8.0 },
            OperatorInput::Resume,
        );
    let log = common::run_catalog("danger-zone", 0, &script);
    assert_ne!(log.end_reason(), Some(EndReason::Collision));
    let ignored = events(&log)
        .into_iter()
        .any(|e| matches!(e, LogEvent::InputIgnored { input, .. } if input == "resume"));
    assert!(ignored);
    assert_eq!(log.ticks().last().unwrap().ego[3], 0.0);
}

#[test]
fn sensor_failure_stop_stays_in_lane() {
    let log = common::run_catalog("sensor-failure", 0, &OperatorScript::silent());
    assert_eq!(log.end_reason(), Some(EndReason::MrmStop));
    let mrm: Vec<_> = log.ticks().filter(|r| r.mode == Mode::Mrm).collect();
    assert!(!mrm.is_empty());
    for r in &mrm {
        assert!(r.d.abs() < 0.3, "drifted to d={} at t={}", r.d, r.t);
    }
}

#[test]
fn traffic_does_not_perturb_perception_noise() {
    let mut quiet = catalog_scenario("vanishing-markings").unwrap();
    quiet.sensor_noise_sigma = 0.2;
    let mut busy = quiet.clone();
    // oncoming lane, never in the ego's path
    busy.traffic = TrafficDecl {
        vehicles: 6,
        lane: Some(conflictsim_core::roadnet::LaneId(1)),
        jitter: 3.0,
        ..TrafficDecl::default()
    };
    let raw = |spec: &conflictsim_core::scenario::ScenarioSpec| {
        let log = run_episode(
            EpisodeConfig::new(spec.clone()).with_seed(4),
            &OperatorScript::silent(),
        )
        .unwrap();
        log.ticks()
            .map(|r| (r.conf_raw, r.offset_meas))
            .collect::<Vec<_>>()
    };
    let ep = Episode::new(
        EpisodeConfig::new(busy.clone()),
        &BuiltinMaps,
        &ControllerRegistry::with_builtins(),
    )
    .unwrap();
    assert_eq!(ep.actors().len(), 6);
    assert_eq!(raw(&quiet), raw(&busy));
}

#[test]
fn nominal_run_stays_automated() {
    let net = common::circle_network(100.0, 2000);
    let cfg = EpisodeConfig::new(common::plain_scenario("circle")).with_max_ticks(200);
    let log = Episode::with_network(cfg, net, &ControllerRegistry::with_builtins())
        .unwrap()
        .run(&OperatorScript::silent());
    let ticks: Vec<_> = log.ticks().collect();
    assert_eq!(ticks.len(), 200);
    for (k, r) in ticks.iter().enumerate() {
        assert_eq!(r.k, k as u64);
        assert_eq!(r.t, k as f64 * 0.05);
        assert_eq!(r.mode, Mode::Auto);
    }
    assert_eq!(log.summary().unwrap().tor_count, 0);
    assert_eq!(log.end_reason(), Some(EndReason::MaxTicks));
}

#[test]
fn markings_loss_then_ack_after_two_seconds() {
    let log = common::run_catalog("vanishing-markings", 0, &OperatorScript::ack_after(2.0));
    let seq: Vec<_> = events(&log)
        .into_iter()
        .filter(|e| matches!(e, LogEvent::TorIssued { .. } | LogEvent::Takeover { .. }))
        .cloned()
        .collect();
    match seq.as_slice() {
        [LogEvent::TorIssued { conflict: 10, .. }, LogEvent::Takeover {
            conflict: 10,
            reaction_time,
        }] => {
            assert!((reaction_time - 2.0).abs() <= 0.05 + 1e-9)
        }
        other => panic!("unexpected sequence {other:?}"),
    }
}

#[test]
fn blocked_merge_is_reported_before_the_ramp_ends() {
    let ep = common::catalog_episode("onramp-blocked", 0);
    let net = ep.network().clone();
    let log = ep.run(&OperatorScript::silent());
    let tor = log
        .events()
        .find(|e| matches!(e.event, LogEvent::TorIssued { conflict: 5, .. }))
        .expect("merge-infeasible TOR");
    let r = log.ticks().find(|r| r.k == tor.k).unwrap();
    let lane = net.lane(r.lane).unwrap();
    assert!(lane.is_merge_lane(), "TOR off the ramp on {:?}", r.lane);
    assert!(r.s < lane.merge_end_s().unwrap(), "s {} past ramp end", r.s);
}
