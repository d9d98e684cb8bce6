//! End-to-end runs of the `splitree` binary.

use std::path::Path;
use std::process::{Command, Output};

fn splitree(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitree"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SPLITREE_SEED")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn scale_row_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitree(dir.path(), &["scale", "--lifetime", "exp:1", "--b", "0.8", "--q", "0.3", "--xmax", "10", "--h", "0.001"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("scale.csv"));
    assert!(csv.starts_with("schema_version,x,W_q,int_W_q,G_q\n"));
    let row = csv.lines().find(|l| l.split(',').nth(1) == Some("1.0")).expect("row at x = 1");
    let w: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((w - 2.3747).abs() < 5e-5, "W(1) = {w}");
    assert_eq!(csv.lines().count(), 10_002);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["q"], 0.3);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulation_is_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--lifetime", "exp:1", "--b", "0.8", "--delta", "0.3", "--reps", "100000", "--seed", "42"];
    let first = splitree(a.path(), &args);
    assert!(first.status.success());
    assert!(String::from_utf8_lossy(&first.stdout).contains("seed=42"));
    let mut threaded = vec!["--threads", "3"];
    threaded.extend_from_slice(&args);
    assert!(splitree(b.path(), &threaded).status.success());
    for file in ["replicates.csv", "carriers.csv"] {
        assert_eq!(read(&a.path().join(file)), read(&b.path().join(file)), "{file} differs");
    }
    let replicates = read(&a.path().join("replicates.csv"));
    assert!(replicates.starts_with("schema_version,replicate,detected,status,T,N_T\n"));
    assert_eq!(replicates.lines().count(), 100_001);
}

#[test]
fn seed_comes_from_the_environment_when_not_given() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_splitree"))
        .args(["--out", dir.path().to_str().unwrap(), "simulate", "--reps", "10"])
        .env("SPLITREE_SEED", "991")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("seed=991\n"));
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["seed"], 991);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"b": 0.5, "reps": 20, "seed": 4}"#).unwrap();
    let out = splitree(dir.path(), &["--config", config.to_str().unwrap(), "simulate", "--b", "0.9"]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["b"], 0.9);
    assert_eq!(manifest["config"]["reps"], 20);
    assert_eq!(manifest["seed"], 4);
}

#[test]
fn verification_passes_at_standard_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = splitree(dir.path(), &["verify", "vervaat", "--reps", "100000", "--seed", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes_separate_usage_runtime_and_verification_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(splitree(dir.path(), &["bogus"]).status.code(), Some(2));
    let bad = splitree(dir.path(), &["scale", "--b=-1"]);
    assert_eq!(bad.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&bad.stderr).trim()).unwrap();
    assert_eq!(err["error"]["category"], "config");
    let missing = splitree(dir.path(), &["fit", "--los", "exp:1", "--data", "/definitely/missing.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    // an absurd significance level makes some check reject
    let strict = splitree(dir.path(), &["verify", "vervaat", "--reps", "2000", "--alpha", "0.999", "--seed", "1"]);
    assert_eq!(strict.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("FAIL"));
}

#[test]
fn hospital_simulation_feeds_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sim = splitree(dir.path(), &["simulate", "--los", "exp:1", "--reps", "4000", "--seed", "5"]);
    assert!(sim.status.success());
    let carriers = read(&dir.path().join("carriers.csv"));
    assert!(carriers.starts_with("schema_version,replicate,A,R,U,H\n"));
    let data = dir.path().join("outbreaks.csv");
    let fit = splitree(dir.path(), &["fit", "--data", data.to_str().unwrap(), "--los", "exp:1"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("fit.json"))).unwrap();
    let delta = report["estimate"]["delta_hat"].as_f64().unwrap();
    assert!((delta - 0.3).abs() < 0.1, "delta_hat = {delta}");
}

#[test]
fn law_tables_are_written() {
    let dir = tempfile::tempdir().unwrap();
    assert!(splitree(dir.path(), &["law", "nt", "--nmax", "5"]).status.success());
    let nt = read(&dir.path().join("law_nt.csv"));
    assert_eq!(nt.lines().nth(1), Some("1,1,0.5"));
    assert!(splitree(dir.path(), &["law", "t", "--ymax", "4", "--points", "5", "--joint"]).status.success());
    let t = read(&dir.path().join("law_t.csv"));
    let last: f64 = t.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(last < 0.375 && last > 0.35);
    assert!(splitree(dir.path(), &["law", "age", "--window", "2", "--points", "3"]).status.success());
    assert_eq!(read(&dir.path().join("law_age.csv")).lines().count(), 4);
}
