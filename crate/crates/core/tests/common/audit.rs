use rand::Rng;
use rand_chacha::ChaCha8Rng;

use conflictsim_core::conflicts::{registry_get, ActiveConflict, Evidence};
use conflictsim_core::perception::PerceptionFrame;
use conflictsim_core::supervisor::{
    supervisor_tick, ManualControl, Mode, OperatorInput, SupervisorConfig, SupervisorEvent,
    SupervisorState,
};

// written out independently of the implementation's table
pub const EDGES: &[(Mode, Mode)] = &[
    (Mode::Auto, Mode::Warning),
    (Mode::Warning, Mode::Auto),
    (Mode::Auto, Mode::TorPending),
    (Mode::Warning, Mode::TorPending),
    (Mode::TorPending, Mode::Manual),
    (Mode::TorPending, Mode::Mrm),
    (Mode::Manual, Mode::Auto),
];

pub const DT: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Step {
    pub confidence: f64,
    pub conflict: Option<u32>,
    pub inputs: Vec<OperatorInput>,
}

pub fn input_from(code: u8) -> OperatorInput {
    match code % 4 {
        0 => OperatorInput::TakeoverAck,
        1 => OperatorInput::Resume,
        2 => OperatorInput::Control(ManualControl {
            steer: 0.1,
            throttle: 0.3,
            brake: 0.0,
        }),
        _ => OperatorInput::Invalid {
            reason: "garbage".into(),
        },
    }
}

pub fn random_step(rng: &mut ChaCha8Rng, ids: &[u32]) -> Step {
    // long runs of each regime so debounce windows are actually crossed
    let confidence = [0.1, 0.4, 0.59, 0.6, 0.8, 1.0][rng.gen_range(0..6)];
    let conflict = (rng.gen_range(0..4) == 0).then(|| ids[rng.gen_range(0..ids.len())]);
    let inputs = if rng.gen_range(0..40) == 0 {
        vec![input_from(rng.gen())]
    } else {
        vec![]
    };
    Step {
        confidence,
        conflict,
        inputs,
    }
}

/// Tracks every TOR from issuance to resolution and checks each emitted edge.
#[derive(Default)]
pub struct Audit {
    pub tors: usize,
    pub resolved: usize,
    pending: Option<(f64, f64)>,
}

impl Audit {
    fn observe(
        &mut self,
        before: Mode,
        after: &SupervisorState,
        events: &[SupervisorEvent],
        t: f64,
    ) -> Result<(), String> {
        let mut mode = before;
        for e in events {
            match e {
                SupervisorEvent::ModeChange { from, to } => {
                    if *from != mode {
                        return Err(format!("edge from {from:?} while in {mode:?}"));
                    }
                    if !EDGES.contains(&(*from, *to)) {
                        return Err(format!("illegal edge {from:?} -> {to:?}"));
                    }
                    mode = *to;
                }
                SupervisorEvent::TorIssued { conflict, budget } => {
                    if self.pending.is_some() {
                        return Err("TOR issued while one is pending".into());
                    }
                    let urgency = registry_get(*conflict).unwrap().urgency;
                    let expect = [20.0, 10.0, 5.0][urgency as usize - 1];
                    if *budget != expect {
                        return Err(format!("budget {budget} for urgency {urgency}"));
                    }
                    self.tors += 1;
                    self.pending = Some((t, *budget));
                }
                SupervisorEvent::Takeover { reaction_time, .. } => {
                    let (at, budget) = self.pending.take().ok_or("takeover without TOR")?;
                    // an ack on the expiry tick still wins, inputs are handled first
                    if (reaction_time - (t - at)).abs() > 1e-9
                        || *reaction_time > budget + DT + 1e-9
                    {
                        return Err(format!("reaction {reaction_time} for TOR at {at}"));
                    }
                    self.resolved += 1;
                }
                SupervisorEvent::MissedTor { .. } => {
                    let (at, budget) = self.pending.take().ok_or("missed TOR without TOR")?;
                    if t - at <= budget {
                        return Err(format!("missed after only {} s of {budget}", t - at));
                    }
                    if t - at > budget + DT + 1e-9 {
                        return Err(format!("budget expiry detected late: {} s", t - at));
                    }
                    self.resolved += 1;
                }
                _ => {}
            }
        }
        if mode != after.mode {
            return Err(format!(
                "events end in {mode:?} but state is {:?}",
                after.mode
            ));
        }
        if before == Mode::Mrm && after.mode != Mode::Mrm {
            return Err("left MRM".into());
        }
        if after.mode != Mode::TorPending && self.pending.is_some() {
            return Err(format!("TOR unresolved in {:?}", after.mode));
        }
        Ok(())
    }
}

pub fn tick(
    state: &SupervisorState,
    cfg: &SupervisorConfig,
    step: &Step,
    k: u64,
) -> (SupervisorState, Vec<SupervisorEvent>, f64) {
    let t = k as f64 * DT;
    let frame = PerceptionFrame {
        t,
        confidence: step.confidence,
        confidence_raw: step.confidence,
        lateral_offset_meas: 0.0,
        sensor_failed: false,
    };
    let conflict = step.conflict.map(|id| ActiveConflict {
        id,
        evidence: Evidence::LowConfidence {
            confidence: step.confidence,
        },
    });
    let (s, e) = supervisor_tick(state, cfg, &frame, conflict.as_ref(), &step.inputs, t);
    (s, e, t)
}

/// Runs `steps`, then ticks without input until any pending TOR resolves.
pub fn audit_run(steps: &[Step]) -> Result<Audit, String> {
    let cfg = SupervisorConfig::default();
    let mut state = SupervisorState::new(&cfg);
    let mut audit = Audit::default();
    let mut k = 0;
    for step in steps {
        let before = state.mode;
        let (s, e, t) = tick(&state, &cfg, step, k);
        audit.observe(before, &s, &e, t)?;
        state = s;
        k += 1;
    }
    let idle = Step {
        confidence: 1.0,
        conflict: None,
        inputs: vec![],
    };
    for _ in 0..500 {
        if state.mode != Mode::TorPending {
            break;
        }
        let before = state.mode;
        let (s, e, t) = tick(&state, &cfg, &idle, k);
        audit.observe(before, &s, &e, t)?;
        state = s;
        k += 1;
    }
    if audit.tors != audit.resolved {
        return Err(format!("{} TORs, {} resolved", audit.tors, audit.resolved));
    }
    Ok(audit)
}

/// Random episodes totalling at least `steps` ticks; returns (episodes, TORs).
pub fn random_soak(seed: u64, steps: usize) -> Result<(usize, usize), String> {
    use rand::SeedableRng;
    let ids = conflictsim_core::conflicts::registered_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut total, mut tors, mut episodes) = (0, 0, 0);
    while total < steps {
        // MRM is terminal, so restart an episode every few hundred ticks
        let len = rng.gen_range(50..2000);
        let mut seq = Vec::with_capacity(len);
        let mut cur = random_step(&mut rng, &ids);
        for _ in 0..len {
            if rng.gen_range(0..15) == 0 {
                cur = random_step(&mut rng, &ids);
            }
            let mut s = cur.clone();
            s.inputs = if rng.gen_range(0..40) == 0 {
                vec![input_from(rng.gen())]
            } else {
                vec![]
            };
            seq.push(s);
        }
        let audit = audit_run(&seq).map_err(|e| format!("episode {episodes}: {e}"))?;
        tors += audit.tors;
        total += len;
        episodes += 1;
    }
    Ok((episodes, tors))
}
