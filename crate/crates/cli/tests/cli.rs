use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qcqmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcqmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = qcqmc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = qcqmc(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ed_prints_documented_fields() {
    let v: Value = serde_json::from_str(&ok(&["ed", "--L", "4"])).unwrap();
    for key in ["L", "J", "Gamma", "E0", "E0_per_site", "residual", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["L"], 4);
    let e0 = v["E0"].as_f64().unwrap();
    assert!((v["E0_per_site"].as_f64().unwrap() - e0 / 4.0).abs() < 1e-15);
}

#[test]
fn ed_writes_manifest_only_with_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out-dir", s(dir.path()), "ed", "--L", "3", "--Gamma", "0.5"]);
    let ed = json(&dir.path().join("ed.json"));
    assert_eq!(ed["Gamma"], 0.5);
    let m = json(&dir.path().join("run_manifest.json"));
    assert_eq!(m["command"], "ed");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn ed_rejects_several_sizes_and_missing_size() {
    assert!(err(&["ed", "--L", "4,6"]).contains("exactly one system size"));
    assert!(err(&["ed"]).contains("--L"));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"model": {"L": 6}, "gfmc": {"chainlength": 10}}"#).unwrap();
    let msg = err(&["--config", s(&cfg), "ed"]);
    assert!(msg.contains("gfmc") && msg.contains("chainlength"), "{msg}");

    std::fs::write(&cfg, r#"{"model": {"L": 6}, "gfmc": {"chain_length": 50, "warmup": 40}}"#).unwrap();
    let msg = err(&["--config", s(&cfg), "ed"]);
    assert!(msg.contains("gfmc.chain_length") && msg.contains("warmup + l_reweight"), "{msg}");
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"L": 6}, "experiment": {"base_seed": 5, "replicates": 2}, "gfmc": {"chain_length": 2000, "warmup": 100}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["--config", s(&cfg), "--seed", "7", "--out-dir", s(&out), "gfmc", "--L", "4", "--reps", "3"]);
    let m = json(&out.join("run_manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["model"]["L"], 4);
    assert_eq!(m["config"]["experiment"]["replicates"], 3);
    assert_eq!(m["config"]["gfmc"]["chain_length"], 2000);
    let csv = std::fs::read_to_string(out.join("gfmc_runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 3);
}

#[test]
fn scan_writes_na_for_unmeasured_states() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out-dir", s(dir.path()), "--seed", "3", "scan", "--L", "8", "--M0", "1", "--reps", "2"]);
    let text = std::fs::read_to_string(dir.path().join("local_energy_scan.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version=1"));
    assert_eq!(
        lines.next().unwrap(),
        "rep,rank,state,exact_amp,noisy_amp,exact_eloc,noisy_eloc,L,M0,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 256);
    assert!(rows.iter().any(|r| r.split(',').nth(6) == Some("NA")));
    assert!(rows.iter().all(|r| r.ends_with(",8,1,3")));
    let m = json(&dir.path().join("run_manifest.json"));
    assert_eq!(m["outputs"][0], "local_energy_scan.csv");
}

#[test]
fn scan_needs_m0() {
    assert!(err(&["scan", "--L", "6"]).contains("--M0"));
}

#[test]
fn gfmc_dumps_chains_and_accepts_fixed_shift() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "--out-dir", s(dir.path()), "--threads", "1", "gfmc", "--L", "4", "--M", "500", "--reps", "2",
        "--chain-length", "800", "--warmup", "100", "--l-reweight", "10", "--lambda-shift", "9.5", "--dump-chains",
    ]);
    let chain = std::fs::read_to_string(dir.path().join("chain_L4_rep1.csv")).unwrap();
    assert_eq!(chain.lines().nth(1), Some("n,state,b,e"));
    assert_eq!(chain.lines().count(), 2 + 700);
    let summary = json(&dir.path().join("gfmc_summary.json"));
    assert_eq!(summary["sizes"][0]["M"], 500);
    let m = json(&dir.path().join("run_manifest.json"));
    assert_eq!(m["config"]["gfmc"]["lambda_shift"], 9.5);
    assert_eq!(m["threads"], 1);
}

#[test]
fn gfmc_rejects_bad_shift() {
    assert!(err(&["gfmc", "--L", "4", "--lambda-shift", "big"]).contains("lambda-shift"));
    assert!(err(&["gfmc", "--L", "4", "--lambda-shift", "3"]).contains("lambda_shift"));
}

#[test]
fn sweep_outputs_and_extrapolate_from_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "--out-dir", s(dir.path()), "sweep", "--L", "4,6", "--M", "50,200,800,3200", "--reps", "4",
        "--chain-length", "3000", "--trial", "exact-groundstate",
    ]);
    for f in ["sweep_points.csv", "scaling_summary.json", "average_energy_summary.json", "e0_cache.json", "run_manifest.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("sweep_points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 2 * 4 * 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("L,M,trial_kind,rep,energy_per_site,E0_per_site,signed_error"));
    let cache = json(&dir.path().join("e0_cache.json"));
    assert!(cache["(6,1,1)"]["E0"].as_f64().unwrap() < 0.0);

    let summary_path = dir.path().join("scaling_summary.json");
    let mut summary = json(&summary_path);
    assert_eq!(summary["trial_kind"], "exact-groundstate");
    assert_eq!(summary["schema_version"], 1);
    summary["global"]["0.005"] = serde_json::json!({"a": 2.0, "b": 1.0, "r_squared": 1.0, "points": 2});
    std::fs::write(&summary_path, summary.to_string()).unwrap();
    let v: Value = serde_json::from_str(&ok(&["extrapolate", "--summary", s(&summary_path), "--L", "10"])).unwrap();
    assert_eq!(v["formula"]["shots"], 2048.0);

    summary["global"]["0.005"] = Value::Null;
    std::fs::write(&summary_path, summary.to_string()).unwrap();
    assert!(err(&["extrapolate", "--summary", s(&summary_path)]).contains("no exponential fit"));
}

#[test]
fn extrapolate_reports_both_paths() {
    let v: Value = serde_json::from_str(&ok(&["extrapolate"])).unwrap();
    let formula = v["formula"]["shots"].as_f64().unwrap();
    assert!((formula / 2.0e13 - 1.0).abs() < 0.01);
    assert_eq!(v["quoted"]["shots"], 1.6e13);
    assert!((v["formula_over_quoted"].as_f64().unwrap() - formula / 1.6e13).abs() < 1e-12);
}
