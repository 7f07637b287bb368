//! Command-line runner and live session server.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod server;
pub mod wire;

use std::ffi::OsString;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use conflictsim_core::control::{ControllerId, ControllerRegistry};
use conflictsim_core::engine::{Episode, EpisodeConfig, EpisodeLog, OperatorScript};
use conflictsim_core::roadnet::BUILTIN_MAPS;
use conflictsim_core::scenario::{
    catalog_xml, parse_scenario_with, FileMaps, ScenarioSpec, CATALOG_NAMES,
};

use cli::{parse_cli, CliError, RunMode, SessionOptions};
use server::{serve, ServeConfig};
use wire::FrameOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

/// Catalog name, or a path to a scenario file whose maps resolve relative
/// to its directory.
pub fn load_scenario(name: &str) -> Result<(ScenarioSpec, FileMaps), Failure> {
    if let Some(xml) = catalog_xml(name) {
        let maps = FileMaps {
            base: PathBuf::from("."),
        };
        return parse_scenario_with(xml, &maps)
            .map(|s| (s, maps))
            .map_err(|e| validation(e.to_string()));
    }
    let path = Path::new(name);
    let text = fs::read_to_string(path).map_err(|e| {
        validation(format!(
            "`{name}` is neither a catalog scenario ({}) nor a readable file: {e}",
            CATALOG_NAMES.join(", ")
        ))
    })?;
    let maps = FileMaps {
        base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let spec = parse_scenario_with(&text, &maps).map_err(|e| validation(format!("{name}: {e}")))?;
    Ok((spec, maps))
}

pub fn load_script(opts: &SessionOptions) -> Result<OperatorScript, Failure> {
    if let Some(path) = &opts.operator_script {
        let text =
            fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        return OperatorScript::from_json(&text)
            .map_err(|e| validation(format!("{}: {e}", path.display())));
    }
    Ok(opts
        .ack_after
        .map_or_else(OperatorScript::silent, OperatorScript::ack_after))
}

pub fn build_episode(opts: &SessionOptions) -> Result<Episode, Failure> {
    let (spec, maps) = load_scenario(&opts.scenario)?;
    let mut config = EpisodeConfig::new(spec).with_seed(opts.seed);
    config.controller = ControllerId(opts.model.clone());
    config.randomize_spawn = opts.random_spawn;
    if let Some(n) = opts.max_ticks {
        config.max_ticks = n;
    }
    Episode::new(config, &maps, &ControllerRegistry::with_builtins())
        .map_err(|e| validation(e.to_string()))
}

fn finish(log: &EpisodeLog, opts: &SessionOptions) -> Result<(), Failure> {
    if let Some(path) = &opts.record {
        log.write_to(path)
            .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    let summary = log.summary().expect("finished log has a summary");
    println!(
        "{}",
        serde_json::to_string(summary).expect("summary serializes")
    );
    Ok(())
}

pub fn execute(opts: &SessionOptions) -> Result<(), Failure> {
    match &opts.mode {
        RunMode::List => {
            println!("scenarios: {}", CATALOG_NAMES.join(", "));
            println!("maps: {}", BUILTIN_MAPS.join(", "));
            println!(
                "models: {}",
                ControllerRegistry::with_builtins().names().join(", ")
            );
            Ok(())
        }
        RunMode::Headless => {
            let episode = build_episode(opts)?;
            let script = load_script(opts)?;
            finish(&episode.run(&script), opts)
        }
        RunMode::Serve(addr) => {
            let episode = build_episode(opts)?;
            let script = load_script(opts)?;
            let listener = TcpListener::bind(addr)
                .map_err(|e| runtime(format!("cannot listen on {addr}: {e}")))?;
            let local = listener.local_addr().map_err(|e| runtime(e.to_string()))?;
            eprintln!("waiting for a client on ws://{local}");
            let cfg = ServeConfig {
                frame: FrameOptions {
                    audio: opts.audio,
                    draw_route: opts.draw_route,
                },
                ..ServeConfig::default()
            };
            let log =
                serve(&listener, episode, &script, &cfg).map_err(|e| runtime(e.to_string()))?;
            finish(&log, opts)
        }
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let opts = match parse_cli(argv) {
        Ok(o) => o,
        Err(CliError::Display(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("{}", msg.trim_end());
            return EXIT_USAGE;
        }
    };
    match execute(&opts) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
