//! End-to-end CLI behaviour: exit codes, config validation, output files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hnoma(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnoma"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn ess_solves_the_scaled_cost_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ess.json",
        r#"{"R": 1.0, "c": 2.0, "gamma_db": 6.020599913279624, "gbar_db": 10.0}"#,
    );
    let out = hnoma(&["ess", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let state = doc["solution"]["state"].as_array().unwrap();
    // solved root of the defining equations at these parameters
    assert!((state[0].as_f64().unwrap() - 0.036052).abs() < 1e-4);
    assert!((state[1].as_f64().unwrap() - 0.414425).abs() < 1e-4);
    assert!((state[2].as_f64().unwrap() - 0.549523).abs() < 1e-4);
    let tau = doc["thresholds"]["tau"].as_f64().unwrap();
    let tau_pn = doc["thresholds"]["tau_pn"].as_f64().unwrap();
    assert!((tau - 7.9745).abs() < 1e-3);
    assert!((tau_pn - 33.2278).abs() < 1e-3);
    assert!(doc["meta"]["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn ess_reports_the_no_transmission_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fixed.json",
        r#"{"R": 1.0, "C1": 2.0, "C2": 1.5, "gamma_linear": 4.0, "gbar_linear": 10.0}"#,
    );
    let out = hnoma(&["ess", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["solution"]["regime"], "FixedC");
    assert_eq!(doc["solution"]["state"].as_array().unwrap()[2], 1.0);
    let warnings = doc["solution"]["warnings"].as_array().unwrap();
    assert!(warnings[0].as_str().unwrap().contains("no transmission"));
    // tau_pn is infinite here and serializes as null
    assert!(doc["thresholds"]["tau_pn"].is_null());
}

#[test]
fn ess_flags_collapsed_solutions_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tiny.json",
        r#"{"R": 1.0, "c": 1e-9, "gamma_linear": 4.0, "gbar_linear": 10.0}"#,
    );
    let out = hnoma(&["ess", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["solution"]["valid"], false);
    assert!(doc["solution"]["reason"].as_str().unwrap().contains("x3 collapsed"));
}

#[test]
fn malformed_configs_exit_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    // not JSON
    let bad = write(dir.path(), "broken.json", "{R: 1.0");
    let out = hnoma(&["ess", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    // unknown key
    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0, "sltos": 5}"#,
    );
    let out = hnoma(&["ess", "--config", &unknown], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sltos"));
    // both unit variants at once
    let both = write(
        dir.path(),
        "both.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_db": 6.0, "gamma_linear": 4.0, "gbar_linear": 10.0}"#,
    );
    let out = hnoma(&["ess", "--config", &both], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // neither cost model
    let nocost = write(
        dir.path(),
        "nocost.json",
        r#"{"R": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0}"#,
    );
    let out = hnoma(&["ess", "--config", &nocost], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // missing --config
    let out = hnoma(&["ess"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // unknown subcommand is a usage error
    let out = hnoma(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "blocks": 5, "slots": 100, "mode": "state-driven",
            "policy": {"state": [0.5, 0.5, 0.0]}}"#,
    );
    let out = hnoma(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    // --seed on the command line satisfies the requirement
    let out = hnoma(&["simulate", "--config", &cfg, "--seed", "5", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/stats.json").exists());
}

#[test]
fn replicator_writes_a_trajectory_reaching_the_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rep.json",
        r#"{"R": 1.0, "c": 2.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "x0": [0.025, 0.025, 0.95], "mu": 0.2}"#,
    );
    let out = hnoma(&["replicator", "--config", &cfg, "--out", "rep"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("rep/trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# hnoma "));
    assert!(lines.next().unwrap().starts_with("# config_sha256:"));
    assert!(lines.next().unwrap().starts_with("# seed:"));
    assert_eq!(lines.next().unwrap(), "iter,x1,x2,x3,payoff");
    let last = text.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|v| v.parse().unwrap()).collect();
    assert!((cols[1] - 0.035).abs() <= 1e-2);
    assert!((cols[2] - 0.415).abs() <= 1e-2);
    assert!((cols[3] - 0.550).abs() <= 1e-2);
}

#[test]
fn simulate_trace_lists_every_user_slot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "blocks": 3, "slots": 50, "mode": "channel-driven",
            "policy": {"state": [0.2, 0.5, 0.3]}, "seed": 2, "trace": true}"#,
    );
    let out = hnoma(&["simulate", "--config", &cfg, "--out", "t"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    let data_rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, 3 * 50 * 2);
    assert!(text.lines().any(|l| l.ends_with(",true") || l.ends_with(",false")));
}

#[test]
fn sweep_emits_table_and_summary_with_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "axis": "c", "start": 0.2, "stop": 0.8, "count": 13}"#,
    );
    let out = hnoma(&["sweep", "--config", &cfg, "--out", "sw"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sw/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["points"], 13);
    assert_eq!(summary["invalid_points"], 0);
    let cross = summary["crossover"]["value"].as_f64().unwrap();
    assert!((cross - 0.4).abs() < 0.1);
    let table = fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 14);
}

#[test]
fn adaptive_su_bs_writes_block_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ad.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "blocks": 30, "slots_per_block": 10, "num_blocks": 12,
            "mu": 0.5, "x0": [0.333, 0.333, 0.334],
            "schedule": {"ramp": {"base": 0.5, "slope": 0.01}}, "seed": 4}"#,
    );
    let out = hnoma(&["adaptive", "su-bs", "--config", &cfg, "--out", "ad"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("ad/trajectory.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "block,x1,x2,x3,c,est_payoff1,est_payoff2");
    assert_eq!(rows.len(), 13);
    // ramp evaluated at the block start: c[1] = 0.51
    assert!(rows[1].starts_with("1,"));
    assert!(rows[1].contains(",0.51,"));
}

#[test]
fn throughput_reports_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tp.json", r#"{"delta": 0.2}"#);
    let out = hnoma(&["throughput", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc["eta_hnoma_opt"].as_f64().unwrap() - 0.48).abs() < 1e-12);
    assert!((doc["ratio_opt_vs_oma"].as_f64().unwrap() - 1.2).abs() < 1e-12);

    let cfg = write(dir.path(), "tp2.json", r#"{"state": [0.5, 0.5, 0.0]}"#);
    let out = hnoma(&["throughput", "--config", &cfg], dir.path());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["eta_hnoma"], 0.5);
}

#[test]
fn identical_config_and_seed_reproduce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "blocks": 20, "slots": 500, "mode": "channel-driven",
            "policy": {"state": [0.2, 0.5, 0.3]}, "seed": 77, "trace": true}"#,
    );
    for out_dir in ["a", "b"] {
        let out = hnoma(&["simulate", "--config", &cfg, "--out", out_dir], dir.path());
        assert!(out.status.success());
    }
    let read = |d: &str, f: &str| fs::read(dir.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "stats.json"), read("b", "stats.json"));
    assert_eq!(read("a", "trace.csv"), read("b", "trace.csv"));
}

#[test]
fn unwritable_output_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        r#"{"R": 1.0, "c": 1.0, "gamma_linear": 4.0, "gbar_linear": 10.0,
            "blocks": 5, "slots": 10, "mode": "state-driven",
            "policy": {"state": [0.5, 0.5, 0.0]}, "seed": 1}"#,
    );
    // a file where the output directory should be
    fs::write(dir.path().join("occupied"), "not a directory").unwrap();
    let out = hnoma(&["simulate", "--config", &cfg, "--out", "occupied"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
