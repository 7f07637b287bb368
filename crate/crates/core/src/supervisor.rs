//! Takeover-request supervisor.
//!
//! Mode graph:
//!
//! ```text
//! AUTO ⇄ WARNING          confidence below / back above `warn` (return debounced)
//! AUTO, WARNING → TOR_PENDING   conflict reported for ≥ debounce
//! TOR_PENDING → MANUAL    operator acknowledges the takeover
//! TOR_PENDING → MRM       budget expires without acknowledgement (terminal)
//! MANUAL → AUTO           operator resume, confidence ≥ warn, no active conflict
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflicts::{registry_get, ActiveConflict};
use crate::control::lane_keep_steer;
use crate::dynamics::{ControlCommand, VehicleState};
use crate::perception::PerceptionFrame;
use crate::roadnet::RoadNetwork;

/// Absorbs `k·dt` rounding in duration comparisons.
const TIME_EPS: f64 = 1e-9;

/// Deceleration of the minimal-risk maneuver.
pub const MRM_DECEL: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum SupervisorError {
    #[error("urgency must be 1, 2 or 3, got {0}")]
    UrgencyOutOfRange(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Auto,
    Warning,
    TorPending,
    Manual,
    Mrm,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Auto => "AUTO",
            Mode::Warning => "WARNING",
            Mode::TorPending => "TOR_PENDING",
            Mode::Manual => "MANUAL",
            Mode::Mrm => "MRM",
        }
    }

    /// Modes in which the automation produces the driving command.
    pub fn is_automated(self) -> bool {
        matches!(self, Mode::Auto | Mode::Warning | Mode::TorPending)
    }
}

/// Every edge the supervisor may take.
pub const ALLOWED_TRANSITIONS: &[(Mode, Mode)] = &[
    (Mode::Auto, Mode::Warning),
    (Mode::Warning, Mode::Auto),
    (Mode::Auto, Mode::TorPending),
    (Mode::Warning, Mode::TorPending),
    (Mode::TorPending, Mode::Manual),
    (Mode::TorPending, Mode::Mrm),
    (Mode::Manual, Mode::Auto),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub warn: f64,
    pub critical: f64,
    pub debounce: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            warn: 0.6,
            critical: 0.35,
            debounce: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisorConfig {
    pub thresholds: Thresholds,
    /// Takeover budget in seconds for urgency 1, 2 and 3.
    pub budgets: [f64; 3],
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            budgets: [20.0, 10.0, 5.0],
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let t = &self.thresholds;
        if !(0.0 < t.critical && t.critical < t.warn && t.warn < 1.0) {
            return Err(format!(
                "thresholds need 0 < critical < warn < 1, got critical={} warn={}",
                t.critical, t.warn
            ));
        }
        if !(t.debounce + TIME_EPS >= crate::dynamics::DT) || !t.debounce.is_finite() {
            return Err(format!(
                "debounce must be at least one tick ({} s)",
                crate::dynamics::DT
            ));
        }
        if self.budgets.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err("takeover budgets must be positive".into());
        }
        Ok(())
    }

    pub fn budget(&self, urgency: u8) -> Result<f64, SupervisorError> {
        match urgency {
            1..=3 => Ok(self.budgets[urgency as usize - 1]),
            _ => Err(SupervisorError::UrgencyOutOfRange(urgency)),
        }
    }
}

/// Default time budget for resolving a conflict of the given urgency.
pub fn budget_for_urgency(urgency: u8) -> Result<f64, SupervisorError> {
    SupervisorConfig::default().budget(urgency)
}

/// Normalized manual driving input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManualControl {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ManualControl {
    /// steer × 0.5 rad; accel = throttle × 3 − brake × 6.
    pub fn to_command(self) -> ControlCommand {
        let clean = |v: f64, lo: f64, hi: f64| if v.is_finite() { v.clamp(lo, hi) } else { 0.0 };
        let steer = clean(self.steer, -1.0, 1.0);
        let throttle = clean(self.throttle, 0.0, 1.0);
        let brake = clean(self.brake, 0.0, 1.0);
        ControlCommand::new(throttle * 3.0 - brake * 6.0, steer * 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorInput {
    TakeoverAck,
    Resume,
    Control(ManualControl),
    /// Unparseable or otherwise unusable input; logged and dropped.
    Invalid {
        reason: String,
    },
}

impl OperatorInput {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorInput::TakeoverAck => "takeover_ack",
            OperatorInput::Resume => "resume",
            OperatorInput::Control(_) => "control",
            OperatorInput::Invalid { .. } => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SupervisorEvent {
    TorIssued {
        conflict: u32,
        budget: f64,
    },
    Takeover {
        conflict: u32,
        reaction_time: f64,
    },
    MissedTor {
        conflict: u32,
    },
    WarningOn {
        confidence: f64,
    },
    WarningOff {
        confidence: f64,
    },
    ModeChange {
        from: Mode,
        to: Mode,
    },
    InputIgnored {
        input: &'static str,
        mode: Mode,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupervisorState {
    pub mode: Mode,
    pub active_conflict: Option<u32>,
    pub tor_issued_at: Option<f64>,
    pub budget: f64,
    pub reaction_time: Option<f64>,
    /// Latest accepted manual command; neutral until the operator steers.
    pub manual_command: ControlCommand,
    conflict_since: Option<f64>,
    clear_since: Option<f64>,
}

impl Default for SupervisorState {
    fn default() -> Self {
        Self {
            mode: Mode::Auto,
            active_conflict: None,
            tor_issued_at: None,
            budget: SupervisorConfig::default().budgets[2],
            reaction_time: None,
            manual_command: ControlCommand::default(),
            conflict_since: None,
            clear_since: None,
        }
    }
}

impl SupervisorState {
    pub fn new(cfg: &SupervisorConfig) -> Self {
        Self {
            budget: cfg.budgets[2],
            ..Self::default()
        }
    }

    /// Seconds since the pending TOR was issued.
    pub fn tor_elapsed(&self, t: f64) -> Option<f64> {
        match self.mode {
            Mode::TorPending => self.tor_issued_at.map(|at| t - at),
            _ => None,
        }
    }

    fn set_mode(&mut self, to: Mode, events: &mut Vec<SupervisorEvent>) {
        events.push(SupervisorEvent::ModeChange {
            from: self.mode,
            to,
        });
        self.mode = to;
    }
}

/// One supervisor step. Operator inputs are handled first, in order, then
/// budget expiry, then the confidence and conflict rules.
pub fn supervisor_tick(
    state: &SupervisorState,
    cfg: &SupervisorConfig,
    perception: &PerceptionFrame,
    monitor: Option<&ActiveConflict>,
    inputs: &[OperatorInput],
    t: f64,
) -> (SupervisorState, Vec<SupervisorEvent>) {
    let mut s = state.clone();
    let mut events = Vec::new();
    let warn = cfg.thresholds.warn;
    let debounce = cfg.thresholds.debounce;

    for input in inputs {
        let ignore = |s: &SupervisorState, reason: &str| SupervisorEvent::InputIgnored {
            input: input.label(),
            mode: s.mode,
            reason: reason.to_string(),
        };
        match (input, s.mode) {
            (OperatorInput::TakeoverAck, Mode::TorPending) => {
                let issued = s.tor_issued_at.unwrap_or(t);
                let reaction = (t - issued).max(0.0);
                s.reaction_time = Some(reaction);
                s.manual_command = ControlCommand::default();
                events.push(SupervisorEvent::Takeover {
                    conflict: s.active_conflict.unwrap_or(0),
                    reaction_time: reaction,
                });
                s.set_mode(Mode::Manual, &mut events);
            }
            (OperatorInput::Resume, Mode::Manual) => {
                if perception.confidence >= warn && monitor.is_none() {
                    s.active_conflict = None;
                    s.tor_issued_at = None;
                    s.reaction_time = None;
                    s.conflict_since = None;
                    s.clear_since = None;
                    s.set_mode(Mode::Auto, &mut events);
                } else {
                    events.push(ignore(&s, "automation not ready"));
                }
            }
            (OperatorInput::Control(c), Mode::Manual) => s.manual_command = c.to_command(),
            (OperatorInput::Invalid { reason }, _) => events.push(ignore(&s, reason)),
            _ => events.push(ignore(&s, "not applicable in current mode")),
        }
    }

    if s.mode == Mode::TorPending {
        let issued = s.tor_issued_at.unwrap_or(t);
        if t - issued > s.budget + TIME_EPS {
            events.push(SupervisorEvent::MissedTor {
                conflict: s.active_conflict.unwrap_or(0),
            });
            s.set_mode(Mode::Mrm, &mut events);
        }
    }

    if matches!(s.mode, Mode::Auto | Mode::Warning) {
        s.active_conflict = monitor.map(|m| m.id);
        match monitor {
            Some(conflict) => {
                let since = *s.conflict_since.get_or_insert(t);
                if t - since + TIME_EPS >= debounce {
                    let urgency = registry_get(conflict.id).map(|c| c.urgency).unwrap_or(3);
                    let budget = cfg.budget(urgency).unwrap_or(cfg.budgets[2]);
                    s.tor_issued_at = Some(t);
                    s.budget = budget;
                    s.reaction_time = None;
                    s.conflict_since = None;
                    s.clear_since = None;
                    events.push(SupervisorEvent::TorIssued {
                        conflict: conflict.id,
                        budget,
                    });
                    s.set_mode(Mode::TorPending, &mut events);
                }
            }
            None => s.conflict_since = None,
        }
    }

    let confidence = perception.confidence;
    match s.mode {
        Mode::Auto if confidence < warn => {
            s.clear_since = None;
            events.push(SupervisorEvent::WarningOn { confidence });
            s.set_mode(Mode::Warning, &mut events);
        }
        Mode::Warning if confidence >= warn => {
            let since = *s.clear_since.get_or_insert(t);
            if t - since + TIME_EPS >= debounce {
                s.clear_since = None;
                events.push(SupervisorEvent::WarningOff { confidence });
                s.set_mode(Mode::Auto, &mut events);
            }
        }
        Mode::Warning => s.clear_since = None,
        _ => {}
    }

    (s, events)
}

/// Controlled in-lane stop: lane keeping on the offset estimate anchored at
/// the last trusted measurement, −3 m/s² until standstill, then hold.
pub fn mrm_command(ego: &VehicleState, net: &RoadNetwork, offset_estimate: f64) -> ControlCommand {
    let steer = lane_keep_steer(
        net,
        ego,
        ego.lane_ref.lane,
        0.0,
        ego.lane_ref.d - offset_estimate,
    );
    if ego.v <= 0.0 {
        return ControlCommand::new(0.0, steer);
    }
    ControlCommand::new(-MRM_DECEL, steer)
}
