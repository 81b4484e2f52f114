//! End-to-end checks of the `wrsn-sim` binary.

use std::path::Path;
use std::process::{Command, Output};

use wrsn_sim::engine::events_from_csv;
use wrsn_sim::metrics::SUMMARY_CSV_HEADER;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wrsn-sim"));
    c.env_remove("WRSN_SIM_JOBS");
    c
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn run_writes_report_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n_devices": 30, "sim_duration": 600.0}"#);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["n_devices"], 30);
    let events = std::fs::read_to_string(out_dir.join("events.csv")).unwrap();
    assert!(events.starts_with("time_s,event_type,device_id,mcv_id,value\n"));
    events_from_csv(&events).unwrap();
}

#[test]
fn dump_queues_writes_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--devices", "40", "--dump-queues", "--out", dir.path().to_str().unwrap()])
        .args(["--config", write_config(dir.path(), r#"{"sim_duration": 1200.0}"#).to_str().unwrap()])
        .output()
        .unwrap();
    ok(&out);
    let text = std::fs::read_to_string(dir.path().join("queues.jsonl")).unwrap();
    let first = text.lines().next().expect("at least one snapshot");
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert!(v["device_ids"].is_array());
}

#[test]
fn malformed_json_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{ not json");
    let out = bin().args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot parse"));
}

#[test]
fn missing_file_is_config_error() {
    let out = bin().args(["--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn invalid_values_are_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"comm_range": -1.0, "timestep": 0.0}"#);
    let out = bin().args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("comm_range") && err.contains("timestep"), "{err}");
}

#[test]
fn unknown_flag_rejected() {
    let out = bin().arg("--frobnicate").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn unknown_config_field_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n_device": 10}"#);
    let out = bin().args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_sweep_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"sim_duration": 900.0}"#);
    let mut csvs = Vec::new();
    for i in 0..2 {
        let out_dir = dir.path().join(format!("sweep{i}"));
        let out = bin()
            .args(["--sweep", "--counts", "100", "--policy", "ISACM", "--seeds", "2", "--jobs", "2"])
            .args(["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
            .output()
            .unwrap();
        ok(&out);
        csvs.push(std::fs::read(out_dir.join("summary.csv")).unwrap());
        assert!(out_dir.join("summary.json").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SUMMARY_CSV_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("ISACM,100,2,"));
}

#[test]
fn isac_bench_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--isac-bench", "--trials", "100", "--dump-correlation", "12.5"])
        .args(["--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    ok(&out);
    let table = std::fs::read_to_string(dir.path().join("isac_bench.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("snr_db,trials,rmse_m,bias_m,lag_hit_rate"));
    let noiseless = table.lines().find(|l| l.starts_with("inf,")).unwrap();
    let rmse: f64 = noiseless.split(',').nth(2).unwrap().parse().unwrap();
    assert!(rmse <= 0.75);
    assert!(dir.path().join("correlation.csv").exists());
}
