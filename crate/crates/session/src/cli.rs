use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

use conflictsim_core::control::DEFAULT_CONTROLLER;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "conflictsim",
    version,
    about = "Conflict-injecting driving simulator with takeover-request supervision"
)]
struct Args {
    /// Catalog scenario name or path to a scenario XML file.
    #[arg(long)]
    scenario: Option<String>,
    /// Controller model.
    #[arg(long, default_value = DEFAULT_CONTROLLER)]
    model: String,
    /// Play an audio cue when a takeover request is issued.
    #[arg(long)]
    audio: bool,
    /// Send the route polyline to the client.
    #[arg(long)]
    draw_route: bool,
    /// Run to completion without a client and print the summary.
    #[arg(long)]
    headless: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSONL episode log to this file.
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
    /// Address to serve the session on; `:PORT` listens on all interfaces.
    #[arg(long, value_name = "ADDR")]
    listen: Option<String>,
    #[arg(long, value_name = "N")]
    max_ticks: Option<u64>,
    /// Scripted operator acknowledging every takeover request after this delay.
    #[arg(long, value_name = "SECONDS")]
    ack_after: Option<f64>,
    /// JSON file with scripted operator inputs.
    #[arg(long, value_name = "FILE", conflicts_with = "ack_after")]
    operator_script: Option<PathBuf>,
    /// Start from a seeded random choice among the scenario's spawn points.
    #[arg(long)]
    random_spawn: bool,
    /// List catalog scenarios, maps and controllers, then exit.
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunMode {
    List,
    Headless,
    Serve(SocketAddr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub mode: RunMode,
    pub scenario: String,
    pub model: String,
    pub audio: bool,
    pub draw_route: bool,
    pub seed: u64,
    pub record: Option<PathBuf>,
    pub max_ticks: Option<u64>,
    pub ack_after: Option<f64>,
    pub operator_script: Option<PathBuf>,
    pub random_spawn: bool,
}

#[derive(Debug)]
pub enum CliError {
    /// Help or version output; not an error.
    Display(String),
    Usage(String),
}

pub fn parse_listen(addr: &str) -> Result<SocketAddr, String> {
    let full = if addr.starts_with(':') {
        format!("0.0.0.0{addr}")
    } else {
        addr.to_string()
    };
    full.parse()
        .map_err(|_| format!("invalid listen address `{addr}`; expected HOST:PORT or :PORT"))
}

pub fn parse_cli<I, T>(argv: I) -> Result<SessionOptions, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Display(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    })?;
    let usage = |m: &str| Err(CliError::Usage(m.to_string()));
    if args.headless && args.listen.is_some() {
        return usage("--headless and --listen cannot be combined");
    }
    if let Some(d) = args.ack_after {
        if !(d >= 0.0) || !d.is_finite() {
            return usage("--ack-after must be a non-negative number of seconds");
        }
    }
    if args.max_ticks == Some(0) {
        return usage("--max-ticks must be positive");
    }
    let mode = if args.list {
        RunMode::List
    } else if args.headless {
        RunMode::Headless
    } else {
        let addr = args.listen.as_deref().unwrap_or(DEFAULT_LISTEN);
        RunMode::Serve(parse_listen(addr).map_err(CliError::Usage)?)
    };
    let scenario = match (args.scenario, &mode) {
        (Some(s), _) => s,
        (None, RunMode::List) => String::new(),
        (None, _) => return usage("--scenario is required"),
    };
    Ok(SessionOptions {
        mode,
        scenario,
        model: args.model,
        audio: args.audio,
        draw_route: args.draw_route,
        seed: args.seed,
        record: args.record,
        max_ticks: args.max_ticks,
        ack_after: args.ack_after,
        operator_script: args.operator_script,
        random_spawn: args.random_spawn,
    })
}
