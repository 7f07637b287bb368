//! Messages exchanged with a session client. Each frame is one JSON text
//! message; operator messages are JSON objects tagged by `type`.

use serde::Serialize;

use conflictsim_core::conflicts::registry_get;
use conflictsim_core::dynamics::Footprint;
use conflictsim_core::engine::{EventRecord, LogEvent, Summary, TickOutput, TickRecord};
use conflictsim_core::geom::Vec2;
use conflictsim_core::supervisor::{Mode, OperatorInput, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hud {
    pub mode: Mode,
    pub confidence: f64,
    pub warning: Option<&'static str>,
    pub critical: bool,
    pub banner: Option<String>,
    /// Seconds left of the takeover budget while a TOR is pending.
    pub countdown: Option<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WireObject {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
}

impl From<&Footprint> for WireObject {
    fn from(f: &Footprint) -> Self {
        Self {
            id: f.id.to_string(),
            x: f.center.x,
            y: f.center.y,
            yaw: f.yaw,
            length: f.length,
            width: f.width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ServerMessage {
    Frame(WireFrame),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WireFrame {
    #[serde(flatten)]
    pub tick: TickRecord,
    pub path: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<[f64; 2]>>,
    pub objects: Vec<WireObject>,
    pub hud: Hud,
    pub audio_cue: bool,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameOptions {
    pub audio: bool,
    pub draw_route: bool,
}

fn points(p: &[Vec2]) -> Vec<[f64; 2]> {
    p.iter().map(|v| [v.x, v.y]).collect()
}

pub fn hud(out: &TickOutput, thresholds: &Thresholds) -> Hud {
    let r = &out.record;
    let conf = r.conf;
    let warning = if conf < thresholds.critical {
        Some("lane detection lost")
    } else if conf < thresholds.warn {
        Some("lane detection degraded")
    } else {
        None
    };
    let banner = match r.mode {
        Mode::TorPending => {
            let name = r
                .conflict
                .and_then(|id| registry_get(id).ok())
                .map_or("conflict", |c| c.name);
            Some(format!("TAKE OVER: {name}"))
        }
        Mode::Manual => Some("manual control".to_string()),
        Mode::Mrm => Some("minimal risk maneuver".to_string()),
        _ => None,
    };
    Hud {
        mode: r.mode,
        confidence: conf,
        warning,
        critical: conf < thresholds.critical,
        banner,
        countdown: out.tor_elapsed.map(|e| (out.budget - e).max(0.0)),
        budget: out.budget,
    }
}

/// `route` is attached only when given; callers send it once.
pub fn build_frame(
    out: &TickOutput,
    objects: &[Footprint],
    route: Option<&[Vec2]>,
    thresholds: &Thresholds,
    opts: FrameOptions,
) -> WireFrame {
    let tor = out
        .events
        .iter()
        .any(|e| matches!(e.event, LogEvent::TorIssued { .. }));
    WireFrame {
        tick: out.record.clone(),
        path: points(&out.path.points),
        route: route.filter(|_| opts.draw_route).map(points),
        objects: objects.iter().map(WireObject::from).collect(),
        hud: hud(out, thresholds),
        audio_cue: opts.audio && tor,
        events: out.events.clone(),
    }
}

pub fn encode(msg: &ServerMessage) -> String {
    serde_json::to_string(msg).expect("server messages serialize")
}

/// Unparseable messages become [`OperatorInput::Invalid`] so they are
/// logged rather than silently dropped.
pub fn parse_operator_message(text: &str) -> OperatorInput {
    match serde_json::from_str::<OperatorInput>(text) {
        Ok(OperatorInput::Invalid { .. }) => OperatorInput::Invalid {
            reason: "unknown message type `invalid`".into(),
        },
        Ok(OperatorInput::Control(c))
            if ![c.steer, c.throttle, c.brake].iter().all(|v| v.is_finite()) =>
        {
            OperatorInput::Invalid {
                reason: "control values must be finite".into(),
            }
        }
        Ok(input) => input,
        Err(e) => OperatorInput::Invalid {
            reason: format!("malformed operator message: {e}"),
        },
    }
}
