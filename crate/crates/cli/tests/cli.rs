use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rxsat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rxsat")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reports_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("table1.json");
    let out = rxsat(&["analyze", path(&cfg), "--lambda-a", "1000", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let zone = v["zone_model"]["lambda_r"].as_f64().unwrap();
    let sym = v["symmetric_model"]["lambda_r"].as_f64().unwrap();
    assert!((sym - 4000.0 / 9.0).abs() < 0.5, "{sym}");
    assert!(zone > sym);
    assert!((v["ratio"].as_f64().unwrap() - zone / sym).abs() < 1e-9);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analysis.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
}

#[test]
fn plan_hits_target() {
    let cfg = configs().join("table1.json");
    let out = rxsat(&["plan", path(&cfg), "--target-f", "0.3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["feasible"].as_bool().unwrap());
    assert!((v["occupancy"].as_f64().unwrap() - 0.3).abs() < 1e-6);
}

#[test]
fn infeasible_requests_exit_3() {
    let cfg = configs().join("table1.json");
    assert_eq!(
        rxsat(&["plan", path(&cfg), "--target-f", "0.99"]).status.code(),
        Some(3)
    );
    assert_eq!(
        rxsat(&["analyze", path(&cfg), "--lambda-a", "5000"]).status.code(),
        Some(3)
    );
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"receptor_count": "many"}"#).unwrap();
    let out = rxsat(&["analyze", path(&bad), "--lambda-a", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let cfg = fs::read_to_string(configs().join("table1.json")).unwrap();
    let negative = cfg.replace("\"receptor_count\": 10000", "\"receptor_count\": 0");
    assert_ne!(negative, cfg);
    fs::write(&bad, negative).unwrap();
    assert_eq!(rxsat(&["plan", path(&bad), "--target-f", "0.3"]).status.code(), Some(2));

    assert_eq!(rxsat(&["plan"]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        rxsat(&["plan", path(&missing), "--target-f", "0.3"]).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_writes_events_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.json");
    let out = rxsat(&[
        "simulate",
        path(&cfg),
        "--profile",
        "paper",
        "--duration",
        "3",
        "--warmup",
        "1",
        "--seed",
        "9",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(events.starts_with("time_s,event,molecule_id,receptor_id,theta_rad,phi_rad"));
    assert!(events.lines().count() > 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["absorbed_rate"].as_f64().unwrap() > 0.0);
    assert_eq!(report["warmup_end"].as_f64(), Some(1.0));
}

#[test]
fn experiment_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("range.json");
    fs::write(
        &spec,
        format!(
            r#"{{"kind": "range_curve", "scenario_path": "{}", "profile": "paper",
                "sweep": {{"variable": "distance_um", "grid": [15, 20, 25]}}, "target_f": 0.2}}"#,
            path(&configs().join("table1.json"))
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("tables");
    let out = rxsat(&["experiment", path(&spec), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("range_curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("distance_um,"));

    fs::write(&spec, r#"{"kind": "range_curve"}"#).unwrap();
    assert_eq!(rxsat(&["experiment", path(&spec)]).status.code(), Some(2));
}
