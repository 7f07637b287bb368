//! Scripted operators for headless runs.

use serde::{Deserialize, Serialize};

use crate::supervisor::OperatorInput;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptWhen {
    /// Episode time.
    At { at: f64 },
    /// Delay after each TOR.
    AfterTor { after_tor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(flatten)]
    pub when: ScriptWhen,
    pub input: OperatorInput,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorScript {
    pub entries: Vec<ScriptEntry>,
}

impl OperatorScript {
    /// An operator that never responds.
    pub fn silent() -> Self {
        Self::default()
    }

    /// Acknowledges every TOR `delay` seconds after it is issued.
    pub fn ack_after(delay: f64) -> Self {
        Self {
            entries: vec![ScriptEntry {
                when: ScriptWhen::AfterTor { after_tor: delay },
                input: OperatorInput::TakeoverAck,
            }],
        }
    }

    pub fn with(mut self, when: ScriptWhen, input: OperatorInput) -> Self {
        self.entries.push(ScriptEntry { when, input });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let script: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        for (i, e) in script.entries.iter().enumerate() {
            let v = match e.when {
                ScriptWhen::At { at } => at,
                ScriptWhen::AfterTor { after_tor } => after_tor,
            };
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("entry {i}: time must be non-negative"));
            }
        }
        Ok(script)
    }
}

/// Replays a script against the TORs observed so far.
#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    script: OperatorScript,
    fired: Vec<bool>,
    /// Per entry, number of TORs already answered.
    answered: Vec<usize>,
}

impl ScriptedOperator {
    pub fn new(script: OperatorScript) -> Self {
        let n = script.entries.len();
        Self {
            script,
            fired: vec![false; n],
            answered: vec![0; n],
        }
    }

    /// Inputs due at tick time `t`, in script order.
    pub fn inputs_at(&mut self, t: f64, tor_times: &[f64]) -> Vec<OperatorInput> {
        let mut out = Vec::new();
        for (i, e) in self.script.entries.iter().enumerate() {
            match e.when {
                ScriptWhen::At { at } => {
                    if !self.fired[i] && t + TIME_EPS >= at {
                        self.fired[i] = true;
                        out.push(e.input.clone());
                    }
                }
                ScriptWhen::AfterTor { after_tor } => {
                    while let Some(&tor) = tor_times.get(self.answered[i]) {
                        if t + TIME_EPS < tor + after_tor {
                            break;
                        }
                        self.answered[i] += 1;
                        out.push(e.input.clone());
                    }
                }
            }
        }
        out
    }
}
