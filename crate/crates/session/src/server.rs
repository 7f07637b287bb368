//! Live session: one WebSocket client, frames paced by the simulation
//! loop, operator inputs applied at the next tick.
//!
//! The simulation thread publishes each frame into a latest-wins slot and
//! never blocks on the client. A frame that replaces an undelivered one
//! inherits its events and audio cue. Operator messages travel the other way over
//! a bounded channel; the socket thread waits when it is full, so inputs are
//! never dropped.

use std::io;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;
use tungstenite::{Message, WebSocket};

use conflictsim_core::engine::{Episode, EpisodeLog, OperatorScript, ScriptedOperator};
use conflictsim_core::supervisor::OperatorInput;

use crate::wire::{
    build_frame, encode, parse_operator_message, FrameOptions, ServerMessage, WireFrame,
};

const READ_POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session I/O: {0}")]
    Io(#[from] io::Error),
    #[error("websocket handshake failed: {0}")]
    Handshake(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ServeConfig {
    /// Wall-clock time per tick; `None` runs as fast as possible.
    pub pacing: Option<Duration>,
    pub frame: FrameOptions,
    pub input_capacity: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            pacing: Some(Duration::from_millis(50)),
            frame: FrameOptions::default(),
            input_capacity: 256,
        }
    }
}

#[derive(Default)]
struct Outbox {
    frame: Option<WireFrame>,
    last: Option<String>,
}

#[derive(Default)]
struct Slot {
    outbox: Mutex<Outbox>,
    ready: Condvar,
}

impl Slot {
    fn publish(&self, mut frame: WireFrame) {
        let mut out = self.outbox.lock().unwrap();
        if let Some(dropped) = out.frame.take() {
            frame.audio_cue |= dropped.audio_cue;
            let mut events = dropped.events;
            events.append(&mut frame.events);
            frame.events = events;
            frame.route = frame.route.or(dropped.route);
        }
        out.frame = Some(frame);
        drop(out);
        self.ready.notify_one();
    }

    fn close(&self, last: String) {
        self.outbox.lock().unwrap().last = Some(last);
        self.ready.notify_one();
    }

    fn take(&self, wait: Duration) -> (Option<WireFrame>, Option<String>) {
        let guard = self.outbox.lock().unwrap();
        let (mut out, _) = self
            .ready
            .wait_timeout_while(guard, wait, |o| o.frame.is_none() && o.last.is_none())
            .unwrap();
        (out.frame.take(), out.last.take())
    }
}

/// Accepts one client on `listener` and runs the episode against it.
/// Returns the episode log. After a client disconnect the episode runs on
/// unpaced with scripted inputs only, so a pending TOR ends in MRM.
pub fn serve(
    listener: &TcpListener,
    episode: Episode,
    script: &OperatorScript,
    cfg: &ServeConfig,
) -> Result<EpisodeLog, SessionError> {
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let ws = tungstenite::accept(stream).map_err(|e| SessionError::Handshake(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(READ_POLL))?;
    Ok(run_session(ws, episode, script, cfg))
}

fn run_session(
    ws: WebSocket<TcpStream>,
    mut episode: Episode,
    script: &OperatorScript,
    cfg: &ServeConfig,
) -> EpisodeLog {
    let slot = Arc::new(Slot::default());
    let closed = Arc::new(AtomicBool::new(false));
    let delivered = Arc::new(AtomicBool::new(false));
    let (tx, rx) = sync_channel(cfg.input_capacity.max(1));
    let io = {
        let slot = Arc::clone(&slot);
        let closed = Arc::clone(&closed);
        let delivered = Arc::clone(&delivered);
        thread::spawn(move || socket_loop(ws, &slot, &tx, &closed, &delivered))
    };

    let thresholds = episode.scenario().supervisor.thresholds;
    let route = episode.route();
    let mut operator = ScriptedOperator::new(script.clone());
    let start = Instant::now();
    while episode.done().is_none() {
        let mut inputs = operator.inputs_at(episode.time(), episode.tor_times());
        inputs.extend(rx.try_iter());
        let Some(out) = episode.step(&inputs) else {
            break;
        };
        if closed.load(Ordering::SeqCst) {
            continue;
        }
        let objects = episode.footprints();
        // the route rides on frames until one has reached the client
        let route = (!delivered.load(Ordering::SeqCst)).then_some(route.as_slice());
        let frame = build_frame(&out, &objects, route, &thresholds, cfg.frame);
        slot.publish(frame);
        if let Some(p) = cfg.pacing {
            let deadline = start + p * episode.tick() as u32;
            if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
    }
    drop(rx);
    let log = episode.finish();
    if let Some(summary) = log.summary() {
        slot.close(encode(&ServerMessage::Summary(summary.clone())));
    }
    let _ = io.join();
    log
}

fn socket_loop(
    mut ws: WebSocket<TcpStream>,
    slot: &Slot,
    tx: &SyncSender<OperatorInput>,
    closed: &AtomicBool,
    delivered: &AtomicBool,
) {
    loop {
        let (frame, last) = slot.take(READ_POLL);
        if let Some(f) = frame {
            if ws
                .send(Message::text(encode(&ServerMessage::Frame(f))))
                .is_err()
            {
                break;
            }
            delivered.store(true, Ordering::SeqCst);
        }
        if let Some(l) = last {
            let _ = ws.send(Message::text(l));
            let _ = ws.close(None);
            // drain until the close handshake completes
            let deadline = Instant::now() + Duration::from_secs(1);
            while Instant::now() < deadline {
                match ws.read() {
                    Err(tungstenite::Error::Io(e)) if would_block(&e) => continue,
                    Err(_) => break,
                    Ok(_) => {}
                }
            }
            return;
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                // the simulation may already be over; its receiver is gone then
                let _ = tx.send(parse_operator_message(&text));
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if would_block(&e) => {}
            Err(_) => break,
        }
    }
    closed.store(true, Ordering::SeqCst);
}

fn would_block(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
    )
}
