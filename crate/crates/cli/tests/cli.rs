use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ergolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergolab")).args(args).output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary JSON on stdout")
}

fn error(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn zero_strategy_manifest_earns_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"strategy": {"type": "piecewise", "breakpoints": [], "values": [0]},
            "sim": {"dt": 0.01, "horizon": 20, "n_paths": 4}}"#,
    );
    let out = dir.path().join("o");
    let s = summary(&ergolab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]));
    assert_eq!(s["reward_rate"], 0.0);
    assert_eq!(s["config"]["sim"]["n_paths"], 4);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,reward_integral\n"));
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, s);
}

#[test]
fn threshold_summary_reward_near_mu() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&ergolab(&[
        "simulate", "--c", "2", "--dt", "0.01", "--horizon", "500", "--paths", "20", "--out",
        dir.path().to_str().unwrap(),
    ]));
    let r = s["reward_rate"].as_f64().unwrap();
    assert!((r - 1.0).abs() < 0.1, "{r}");
}

#[test]
fn malformed_manifest_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\"model\": ");
    let out = ergolab(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error(&out)["error"], "parse");
}

#[test]
fn usage_errors_exit_two() {
    let out = ergolab(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error(&out)["error"], "usage");
    let out = ergolab(&["simulate", "--mu", "-1", "--c", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ergolab(&["simulate"]);
    assert_eq!(out.status.code(), Some(2), "no strategy given");
}

#[test]
fn numerical_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = ergolab(&[
        "density", "--c", "3", "--mode", "numeric", "--half-width", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error(&out)["error"], "numerical");
}

#[test]
fn bad_thread_count_is_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_ergolab"))
        .args(["hjb"])
        .env("ERGOLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn density_reports_split_and_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let s = summary(&ergolab(&["density", "--c", "3", "--mode", "both", "--out", d]));
    assert!((s["closed_form"]["p_plus"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(s["l1_distance"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("density_numeric.csv").exists());

    let s = summary(&ergolab(&["density", "--c", "2", "--convention", "paper", "--out", d]));
    assert_eq!(s["closed_form"]["p_at_anchor"], 0.5);
    assert_eq!(s["closed_form"]["stationary_reward"], 1.0);
}

#[test]
fn density_rejects_multi_piece_in_closed_form_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"strategy": {"type": "piecewise", "breakpoints": [0, 1], "values": [0, 1.5, 2.5]}}"#,
    );
    let out = ergolab(&["density", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&ergolab(&["density", "--config", &cfg, "--mode", "numeric", "--out", dir.path().to_str().unwrap()]));
    assert!((s["numeric"]["stationary_reward"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn hjb_reports_coefficients_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let s = summary(&ergolab(&["hjb", "--out", d]));
    assert_eq!(s["candidate"]["c2"], 0.0);
    assert_eq!(s["candidate"]["c2_tilde"], 0.0);
    assert_eq!(s["max_abs_residual"], 0.0);
    assert_eq!(s["growth_violation"], false);
    assert_eq!(s["residual_at_x0"]["left"], 0.0);
    assert_eq!(s["residual_at_x0"]["right"], 0.0);
    let csv = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(csv.starts_with("x,residual\n"));
    assert_eq!(csv.lines().count(), 1 + 10_001 + 1, "kink at x0 gives two rows");

    let s = summary(&ergolab(&["hjb", "--r", "1.1", "--out", d]));
    assert_eq!(s["growth_violation"], true);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"sweep": {"c": [], "x0": [0, 1]}}"#);
    let s = summary(&ergolab(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]));
    assert_eq!(s["rows"], 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, "c,x0,reward_estimate,std_error,verdict,error\n");
}

#[test]
fn sweep_rows_sorted_with_in_row_failures() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&ergolab(&[
        "sweep", "--cs", "4,0.75,2", "--x0s", "1,0", "--dt", "0.01", "--horizon", "2000", "--paths", "10", "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(s["rows"], 6);
    assert_eq!(s["failures"], 2);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.splitn(6, ',').collect()).collect();
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(keys, [("0.75", "0"), ("0.75", "1"), ("2", "0"), ("2", "1"), ("4", "0"), ("4", "1")]);
    for r in &rows[..2] {
        assert_eq!(r[4], "transient-positive");
        assert!((r[2].parse::<f64>().unwrap() - 0.75).abs() < 0.05);
    }
    assert!(rows[4][5].contains("outside"), "{:?}", rows[4]);
}

#[test]
fn diagnose_writes_curve_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&ergolab(&[
        "diagnose", "--c", "0", "--dt", "0.01", "--horizon", "1000", "--paths", "10", "--checkpoints", "100,500,1000",
        "--out", dir.path().to_str().unwrap(),
    ]));
    assert_eq!(s["verdict"], "transient-positive");
    let csv = std::fs::read_to_string(dir.path().join("diagnostic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"], "transient-positive");
}

#[test]
fn duplicate_output_paths_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"rate_multiple": 2, "outputs": [{"kind": "summary", "path": "x"}, {"kind": "split_json", "path": "x"}]}"#,
    );
    let out = ergolab(&["density", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
