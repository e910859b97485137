use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn lcroll(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcroll"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = lcroll(dir, args);
    assert!(
        out.status.success(),
        "lcroll {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_bench(dir: &Path) {
    ok(dir, &["generate", "--configs", "24", "--epochs", "20", "--seed", "3", "--out", "bench.csv"]);
}

#[test]
fn generate_writes_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--configs", "100", "--epochs", "50", "--seed", "7", "--out", "bench.csv"]);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 100 * 50 + 1);
    assert!(text.starts_with("id,epoch,value,initial_lr,"));

    let manifest = json(&dir.path().join("bench.csv.manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["outputs"][0]["sha256"], sha(&dir.path().join("bench.csv")));
    assert_eq!(manifest["seeds"]["seed"], 7);
}

#[test]
fn generate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(d, &["generate", "--configs", "10", "--epochs", "8", "--seed", "7", "--out", "x.json"]);
    }
    assert_eq!(sha(&a.path().join("x.json")), sha(&b.path().join("x.json")));
}

#[test]
fn zero_configs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lcroll(dir.path(), &["generate", "--configs", "0", "--epochs", "5", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn missing_dataset_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = lcroll(dir.path(), &["train", "--model", "rf", "--data", "nope.csv", "--out", "m.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn window_with_vrnn_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    let out = lcroll(dir.path(), &["train", "--model", "vrnn", "--window", "4", "--data", "bench.csv", "--out", "m.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--window"));
    assert!(!dir.path().join("m.json").exists());
    assert!(!dir.path().join("m.json.manifest.json").exists());
}

#[test]
fn train_rf_records_split_and_window() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(dir.path(), &["train", "--model", "rf", "--window", "4", "--trees", "10", "--data", "bench.csv", "--out", "rf.json"]);
    let m = json(&dir.path().join("rf.json"));
    assert_eq!(m["kind"], "windowed");
    assert_eq!(m["model"]["window"], 4);
    assert_eq!(m["trained_on"]["test_ids"].as_array().unwrap().len(), 6);
    assert_eq!(m["trained_on"]["train_ids"].as_array().unwrap().len(), 18);
    assert!(dir.path().join("rf.json.manifest.json").exists());
}

#[test]
fn train_vrnn_with_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(
        dir.path(),
        &[
            "train", "--model", "vrnn", "--lstm-units", "6", "--batch", "22", "--lr", "0.027", "--scheduler", "cos",
            "--train-epochs", "3", "--data", "bench.csv", "--out", "vrnn.json",
        ],
    );
    let m = json(&dir.path().join("vrnn.json"));
    assert_eq!(m["kind"], "vrnn");
    assert_eq!(m["model"]["arch"]["lstm_units"], 6);
    assert_eq!(m["trainer"]["batch_size"], 22);
}

#[test]
fn rollout_with_one_trajectory_has_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(dir.path(), &["train", "--model", "rf", "--trees", "10", "--data", "bench.csv", "--out", "rf.json"]);
    ok(
        dir.path(),
        &[
            "rollout", "--model", "rf.json", "--data", "bench.csv", "--curve", "cfg-00003", "--observed", "4",
            "--horizon", "20", "--rollouts", "1", "--out", "r.csv", "--trajectories", "t.csv",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows[0].starts_with("5,"));
    assert!(rows.iter().all(|r| r.ends_with(",0")));
    assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap().lines().count(), 17);
}

#[test]
fn rollout_unknown_curve_lists_ids() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(dir.path(), &["train", "--model", "rf", "--trees", "5", "--data", "bench.csv", "--out", "rf.json"]);
    let out = lcroll(
        dir.path(),
        &["rollout", "--model", "rf.json", "--data", "bench.csv", "--curve", "zzz", "--observed", "4", "--out", "r.csv"],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("zzz") && err.contains("cfg-00000"));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn evaluate_writes_report_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(dir.path(), &["train", "--model", "rf", "--trees", "10", "--data", "bench.csv", "--out", "rf.json"]);
    ok(dir.path(), &["train", "--model", "rfb", "--trees", "10", "--data", "bench.csv", "--out", "rfb.json"]);
    ok(
        dir.path(),
        &[
            "evaluate", "--model", "rf.json", "--model", "base=rfb.json", "--data", "bench.csv", "--observed", "4,8",
            "--target", "15,20", "--rollouts", "10", "--out", "eval",
        ],
    );
    let report = json(&dir.path().join("eval/report.json"));
    assert_eq!(report["num_curves"], 6);
    let methods: Vec<&str> = report["summaries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["LSV", "LSV", "RF 4", "RF 4", "base", "base"]);
    for f in ["metrics_by_target.csv", "adaptation.csv", "predicted_vs_true.csv"] {
        assert!(dir.path().join("eval").join(f).exists());
    }
    let metrics = std::fs::read_to_string(dir.path().join("eval/metrics_by_target.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 3 * 2 * 2);
    assert!(dir.path().join("eval.manifest.json").exists());

    // RF-B ignores the prefix.
    let cells = report["cells"].as_array().unwrap();
    let base: Vec<f64> = cells
        .iter()
        .filter(|c| c["method"] == "base" && c["target"] == 20)
        .map(|c| c["mse"].as_f64().unwrap())
        .collect();
    assert_eq!(base[0], base[1]);
}

#[test]
fn evaluate_transfer_uses_all_curves() {
    let dir = tempfile::tempdir().unwrap();
    small_bench(dir.path());
    ok(dir.path(), &["generate", "--configs", "9", "--epochs", "20", "--seed", "4", "--out", "other.json"]);
    ok(dir.path(), &["train", "--model", "rf", "--trees", "5", "--data", "bench.csv", "--out", "rf.json"]);
    ok(
        dir.path(),
        &["evaluate", "--model", "rf.json", "--data", "other.json", "--observed", "4", "--rollouts", "5", "--out", "t"],
    );
    assert_eq!(json(&dir.path().join("t/report.json"))["num_curves"], 9);
    let out = lcroll(
        dir.path(),
        &["evaluate", "--model", "rf.json", "--data", "other.json", "--subset", "test", "--out", "u"],
    );
    assert!(!out.status.success());
    assert!(!dir.path().join("u").exists());
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_lcroll"))
        .current_dir(dir.path())
        .env("LCROLL_THREADS", "zero")
        .args(["generate", "--configs", "2", "--epochs", "3", "--out", "x.csv"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let good = Command::new(env!("CARGO_BIN_EXE_lcroll"))
        .current_dir(dir.path())
        .env("LCROLL_THREADS", "1")
        .args(["generate", "--configs", "2", "--epochs", "3", "--out", "x.csv"])
        .output()
        .unwrap();
    assert!(good.status.success());
}
