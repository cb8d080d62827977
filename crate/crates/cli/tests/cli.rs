use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn nimfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nimfa")).args(args).output().unwrap()
}

fn run(args: &[&str], out: &Path) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    nimfa(&all)
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn complete_graph_at_threshold_follows_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", &config("k50_threshold.json"), "--set", "params.states=false"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, ["t", "y"]);
    assert_eq!(rows.len(), 10_001);
    for row in rows.iter().step_by(500) {
        let t: f64 = row[0].parse().unwrap();
        let y: f64 = row[1].parse().unwrap();
        assert!((y - 1.0 / (1.0 + t)).abs() < 1e-8, "t = {t}");
    }
    let meta = metadata(dir.path());
    assert_eq!(meta["command"], "simulate");
    assert_eq!(meta["time_unit"], "1/delta");
    assert!(meta["config"]["out"].is_null());
}

#[test]
fn overrides_reach_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "simulate",
            "--config",
            &config("k50_threshold.json"),
            "--set",
            "params.t_end=2",
            "--set",
            "params.states=false",
            "--seed",
            "77",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = metadata(dir.path());
    assert_eq!(meta["config"]["params"]["t_end"], 2.0);
    assert_eq!(meta["config"]["seed"], 77);
    assert_eq!(csv(&dir.path().join("trajectory.csv")).1.len(), 201);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("out");
    let cases: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), empty.display().to_string()],
        vec!["simulate".into()],
        vec!["predict".into(), "--config".into(), config("k50_threshold.json")],
        vec!["simulate".into(), "--config".into(), config("k50_threshold.json"), "--set".into(), "params.h=-1".into()],
        vec!["simulate".into(), "--config".into(), config("k50_threshold.json"), "--set".into(), "params.bogus=1".into()],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = run(&args, &out);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn parse_errors_point_at_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"graph\": { \"kind\": \"complete\", \"n\": 5 },\n  \"params\": { \"h\": \"fast\" }\n}\n").unwrap();
    let o = run(&["simulate", "--config", bad.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("params.h"), "{err}");
}

#[test]
fn oversized_runs_are_rejected_not_aborted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["simulate", "--config", &config("k50_threshold.json"), "--set", "params.t_end=1e9", "--set", "params.h=1e-9"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(nimfa(&["--help"]).status.code(), Some(0));
    assert_eq!(nimfa(&["--version"]).status.code(), Some(0));
    assert_eq!(nimfa(&["sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "sweep",
            "--config",
            &config("bound_sweep.json"),
            "--set",
            "ensemble.count=2",
            "--set",
            "params.mixed_starts=0",
            "--set",
            "params.t_max=1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "markov",
        "--config",
        &config("markov.json"),
        "--set",
        "params.runs=20",
        "--set",
        "sequence.count=3",
    ];
    let mut one = args.to_vec();
    one.extend(["--workers", "1"]);
    let mut three = args.to_vec();
    three.extend(["--workers", "3"]);
    assert_eq!(run(&one, a.path()).status.code(), Some(0));
    assert_eq!(run(&three, b.path()).status.code(), Some(0));
    for name in ["ensemble.csv", "nimfa.csv", "metadata.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn markov_ensemble_shares_the_mean_field_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["markov", "--config", &config("markov.json"), "--set", "params.runs=10", "--set", "sequence.count=2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, ens) = csv(&dir.path().join("ensemble.csv"));
    let (header, mf) = csv(&dir.path().join("nimfa.csv"));
    assert_eq!(header, ["t", "y"]);
    assert_eq!(ens.len(), mf.len());
    for (e, m) in ens.iter().zip(&mf) {
        assert_eq!(e[0], m[0]);
    }
}

#[test]
fn sweep_writes_one_row_per_graph() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["sweep", "--config", &config("bound_sweep.json"), "--set", "ensemble.count=4", "--set", "params.mixed_starts=3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(header[0], "graph_id");
    assert_eq!(rows.len(), 4);
    assert!(dir.path().join("r0_bins.csv").exists());
    let meta = metadata(dir.path());
    let files: Vec<&str> = meta["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.contains(&"sweep.csv"));
}

#[test]
fn prediction_with_bound_interval_tracks_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["predict", "--config", &config("predict_bound.json")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&dir.path().join("prediction.csv"));
    let y = header.iter().position(|c| c == "y_actual").unwrap();
    let pred = header.iter().position(|c| c == "y_pred").unwrap();
    assert!(rows.iter().any(|r| r[pred] != "NaN"));
    let last = rows.last().unwrap();
    let gap = (last[y].parse::<f64>().unwrap() - last[pred].parse::<f64>().unwrap()).abs();
    assert!(gap < 1e-4, "{gap}");
}

#[test]
fn small_verification_finds_no_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["verify", "--config", &config("verify.json"), "--set", "ensemble.count=4", "--set", "params.t_end=2000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("envelope.csv").exists());
    assert!(dir.path().join("projection.csv").exists());
}
