use std::path::Path;
use std::process::{Command, Output};

use epmotion_cli::config::RunConfig;
use epmotion_cli::pipeline::run_pipeline;
use epmotion_cli::report::{ClusterStatus, RunSummary};
use serde_json::Value;

fn epmotion(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epmotion")).args(args).env("EPMOTION_OUT", out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn direct_ep_start_follows_i_over_delta() {
    let dir = tempfile::tempdir().unwrap();
    let o = epmotion(
        &[
            "run",
            "--model",
            "toy",
            "--n",
            "1",
            "--parity",
            "odd",
            "--start-delta",
            "0.5",
            "--seed-ep",
            "0+2i",
            "--grid",
            "20000",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = RunSummary::load(dir.path()).unwrap();
    assert_eq!(summary.clusters.len(), 1);
    let c = &summary.clusters[0];
    assert_eq!(c.lambda_in, None);
    assert_eq!(c.status, ClusterStatus::Completed);
    assert!((c.lambda_final - epmotion::C64::new(0.0, 1.0)).norm() < 1e-4);

    let rows = std::fs::read_to_string(dir.path().join("c01.jsonl")).unwrap();
    for line in rows.lines() {
        let row: serde_json::Map<String, Value> = serde_json::from_str(line).unwrap();
        let delta = row["delta"].as_f64().unwrap();
        let im = row["lambda_im"].as_f64().unwrap();
        assert!((im - 1.0 / delta).abs() < 1e-4, "δ = {delta}: Im λ = {im}");
        assert!(row["ep_energy_1_re"].as_f64().unwrap().abs() < 1e-8);
    }
    for name in
        ["summary.json", "oracle.json", "residuals.csv", "c01.csv", "lambda_plane.svg", "energies.svg", "spectrum.svg"]
    {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }

    let report = epmotion(&["report"], dir.path());
    assert!(report.status.success());
    assert!(stdout(&report).contains("direct"));
    let validate = epmotion(&["validate"], dir.path());
    assert!(validate.status.success(), "{}", stdout(&validate));
    assert!(stdout(&validate).contains("PASS"));
}

#[test]
fn even_nineteen_crossings_include_fourfold() {
    let dir = tempfile::tempdir().unwrap();
    let o = epmotion(&["crossings", "--model", "toy", "--n", "19", "--parity", "even"], dir.path());
    assert!(o.status.success());
    let report: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("crossings.json")).unwrap()).unwrap();
    let mult: Vec<u64> = report.iter().map(|m| m["multiplicity"].as_u64().unwrap()).collect();
    for k in [1, 2, 4] {
        assert!(mult.contains(&k), "no {k}-fold multiplet in {mult:?}");
    }
    assert!(std::fs::read_to_string(dir.path().join("crossings.svg")).unwrap().contains("4-fold"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg: RunConfig = serde_json::from_value(serde_json::json!({
        "model": {"family": "toy", "n": 3, "omega": 1.0, "parity": "even"},
        "grid": 2000,
        "sample_every": 100,
    }))
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_pipeline(&cfg, a.path()).unwrap();
    run_pipeline(&cfg, b.path()).unwrap();
    assert!(ra.issues.is_empty(), "{:?}", ra.issues);
    assert!(!ra.summary.clusters.is_empty());
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "csv")) {
            let other = b.path().join(path.file_name().unwrap());
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(other).unwrap(), "{}", path.display());
            compared += 1;
        }
    }
    assert!(compared >= 3);
}

#[test]
fn emitted_rows_respect_tolerance() {
    let cfg: RunConfig = serde_json::from_value(serde_json::json!({
        "model": {"family": "toy", "n": 5, "omega": 1.0, "parity": "odd"},
        "grid": 5000,
        "sample_every": 250,
    }))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_pipeline(&cfg, dir.path()).unwrap();
    let mut log = csv::Reader::from_path(dir.path().join("residuals.csv")).unwrap();
    let mut rows = 0;
    for rec in log.records() {
        let rec = rec.unwrap();
        for col in 2..6 {
            assert!(rec[col].parse::<f64>().unwrap() <= cfg.tolerance);
        }
        rows += 1;
    }
    let expected: usize = outcome.summary.clusters.len() * (5000 / 250 + 1);
    assert_eq!(rows, expected);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"model": {"family": "toy", "n": 19, "omega": 1.0, "parity": "odd"}, "grid": 10}"#)
        .unwrap();
    let out = dir.path().join("out");
    let o = epmotion(
        &["sweep", "--config", cfg_path.to_str().unwrap(), "--n", "1", "--deltas", "0,1", "--points", "11"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 11 * 2);
}

#[test]
fn invalid_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!epmotion(&["report"], dir.path()).status.success());
    assert!(!epmotion(&["run", "--grid", "0"], dir.path()).status.success());
    assert!(!epmotion(&["run", "--start-delta", "1"], dir.path()).status.success());
    let o = epmotion(&["run", "--n", "2"], dir.path());
    assert!(!o.status.success());
    let err: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(err["stage"], "model");
}
