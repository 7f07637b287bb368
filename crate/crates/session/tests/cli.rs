use std::fs;
use std::process::Command;

use conflictsim_core::engine::EpisodeLog;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conflictsim"))
}

#[test]
fn headless_run_prints_summary_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("run.jsonl");
    let out = bin()
        .args([
            "--headless",
            "--scenario",
            "danger-zone",
            "--seed",
            "3",
            "--record",
        ])
        .arg(&record)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["tor_count"], 1);
    assert_eq!(summary["end"], "mrm_stop");
    let log = EpisodeLog::parse_jsonl(&fs::read_to_string(&record).unwrap()).unwrap();
    assert_eq!(log.header().seed, 3);
    assert_eq!(log.header().controller, "lane-follow");
}

#[test]
fn ack_after_takes_over() {
    let out = bin()
        .args([
            "--headless",
            "--scenario",
            "vanishing-markings",
            "--ack-after",
            "2",
            "--max-ticks",
            "900",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["takeovers"], 1);
    assert_eq!(summary["end"], "max_ticks");
    assert!((summary["mean_reaction"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(
        code(&["--headless", "--scenario", "x", "--listen", ":9"]),
        Some(2)
    );
    assert_eq!(code(&["--headless"]), Some(2));
    assert_eq!(code(&["--no-such-flag"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--list"]), Some(0));
    assert_eq!(
        code(&["--headless", "--scenario", "no-such-scenario"]),
        Some(3)
    );
    assert_eq!(
        code(&["--headless", "--scenario", "danger-zone", "--model", "mpc"]),
        Some(3)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xml");
    fs::write(&bad, "<scenario name=\"a\"><map>town-loop</map>").unwrap();
    let out = bin()
        .args(["--headless", "--scenario"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let script = dir.path().join("ops.json");
    fs::write(&script, "[{\"at\": 1}]").unwrap();
    let out = bin()
        .args([
            "--headless",
            "--scenario",
            "danger-zone",
            "--operator-script",
        ])
        .arg(&script)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin()
        .args([
            "--headless",
            "--scenario",
            "danger-zone",
            "--record",
            "/nonexistent-dir/x.jsonl",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn scenario_file_with_file_map() {
    let dir = tempfile::tempdir().unwrap();
    let net = conflictsim_core::roadnet::build_builtin_map("highway-onramp").unwrap();
    fs::write(
        dir.path().join("road.json"),
        conflictsim_core::roadnet::network_to_string(&net),
    )
    .unwrap();
    let xml = r#"<scenario name="file-map"><map>road.json</map><start>hw_start</start></scenario>"#;
    let path = dir.path().join("s.xml");
    fs::write(&path, xml).unwrap();
    let out = bin()
        .args(["--headless", "--max-ticks", "100", "--scenario"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["ticks"], 100);
    assert_eq!(summary["tor_count"], 0);
}
