//! JSONL episode log: one header line, tick and event lines in stepping
//! order, one summary line.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conflicts::InjectionAction;
use crate::roadnet::{LaneId, MarkingKind};
use crate::scenario::ScenarioSpec;
use crate::supervisor::Mode;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("log has no header line")]
    MissingHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    MrmStop,
    Collision,
    Destination,
    MaxTicks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub seed: u64,
    pub scenario: String,
    pub controller: String,
    pub dt: f64,
    pub max_ticks: u64,
    pub spec: ScenarioSpec,
}

/// Pre-step state of one tick and the command applied during it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub k: u64,
    pub t: f64,
    /// `[x, y, theta, v]`
    pub ego: [f64; 4],
    pub lane: LaneId,
    pub s: f64,
    pub d: f64,
    /// Distance driven since spawn.
    pub odo: f64,
    pub conf: f64,
    pub conf_raw: f64,
    pub offset_meas: f64,
    pub sensor_failed: bool,
    pub mode: Mode,
    pub conflict: Option<u32>,
    /// `[accel, steer]`
    pub cmd: [f64; 2],
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LogEvent {
    Injection {
        action: InjectionAction,
    },
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
        input: String,
        mode: Mode,
        reason: String,
    },
    LaneChange {
        from: LaneId,
        to: LaneId,
        crossing: MarkingKind,
        mode: Mode,
    },
    Collision {
        with: String,
    },
    EpisodeEnd {
        reason: EndReason,
    },
}

impl LogEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LogEvent::Injection { .. } => "INJECTION",
            LogEvent::TorIssued { .. } => "TOR_ISSUED",
            LogEvent::Takeover { .. } => "TAKEOVER",
            LogEvent::MissedTor { .. } => "MISSED_TOR",
            LogEvent::WarningOn { .. } => "WARNING_ON",
            LogEvent::WarningOff { .. } => "WARNING_OFF",
            LogEvent::ModeChange { .. } => "MODE_CHANGE",
            LogEvent::InputIgnored { .. } => "INPUT_IGNORED",
            LogEvent::LaneChange { .. } => "LANE_CHANGE",
            LogEvent::Collision { .. } => "COLLISION",
            LogEvent::EpisodeEnd { .. } => "EPISODE_END",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    #[serde(flatten)]
    pub event: LogEvent,
    pub k: u64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ticks: u64,
    pub tor_count: u32,
    pub takeovers: u32,
    pub missed: u32,
    pub reaction_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_reaction: Option<f64>,
    pub collisions: u32,
    pub distance: f64,
    pub final_speed: f64,
    pub final_mode: Mode,
    pub end: Option<EndReason>,
    /// A TOR was still pending when the log ended.
    pub unresolved_tor: bool,
    /// The log ends without an episode-end event.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum LogLine {
    Header(Header),
    Tick(TickRecord),
    Event(EventRecord),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    lines: Vec<LogLine>,
}

impl EpisodeLog {
    pub fn new(header: Header) -> Self {
        Self {
            lines: vec![LogLine::Header(header)],
        }
    }

    pub fn push(&mut self, line: LogLine) {
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[LogLine] {
        &self.lines
    }

    pub fn header(&self) -> &Header {
        match &self.lines[0] {
            LogLine::Header(h) => h,
            _ => unreachable!("first line is always the header"),
        }
    }

    pub fn ticks(&self) -> impl Iterator<Item = &TickRecord> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Tick(r) => Some(r),
            _ => None,
        })
    }

    pub fn events(&self) -> impl Iterator<Item = &EventRecord> {
        self.lines.iter().filter_map(|l| match l {
            LogLine::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn summary(&self) -> Option<&Summary> {
        self.lines.iter().rev().find_map(|l| match l {
            LogLine::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.events().find_map(|e| match e.event {
            LogEvent::EpisodeEnd { reason } => Some(reason),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&line_to_json(line));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_jsonl())
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, LogError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: LogLine = serde_json::from_str(raw).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            lines.push(line);
        }
        match lines.first() {
            Some(LogLine::Header(_)) => Ok(Self { lines }),
            _ => Err(LogError::MissingHeader),
        }
    }
}

pub fn line_to_json(line: &LogLine) -> String {
    serde_json::to_string(line).expect("log lines serialize")
}

/// Recomputes the summary from tick and event lines alone.
pub fn summarize(log: &EpisodeLog) -> Summary {
    let mut tor_count = 0;
    let mut takeovers = 0;
    let mut missed = 0;
    let mut reaction_times = Vec::new();
    let mut collisions = 0;
    let mut pending = false;
    let mut end = None;
    for e in log.events() {
        match e.event {
            LogEvent::TorIssued { .. } => {
                tor_count += 1;
                pending = true;
            }
            LogEvent::Takeover { reaction_time, .. } => {
                takeovers += 1;
                reaction_times.push(reaction_time);
                pending = false;
            }
            LogEvent::MissedTor { .. } => {
                missed += 1;
                pending = false;
            }
            LogEvent::Collision { .. } => collisions += 1,
            LogEvent::EpisodeEnd { reason } => end = Some(reason),
            _ => {}
        }
    }
    let last = log.ticks().last();
    let mean_reaction = (!reaction_times.is_empty())
        .then(|| reaction_times.iter().sum::<f64>() / reaction_times.len() as f64);
    Summary {
        ticks: log.ticks().count() as u64,
        tor_count,
        takeovers,
        missed,
        reaction_times,
        mean_reaction,
        collisions,
        distance: last.map_or(0.0, |r| r.odo),
        final_speed: last.map_or(0.0, |r| r.ego[3]),
        final_mode: last.map_or(Mode::Auto, |r| r.mode),
        end,
        unresolved_tor: pending,
        truncated: end.is_none(),
    }
}
