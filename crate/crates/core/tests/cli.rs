use std::path::Path;
use std::process::{Command, Output};

use degenbranch::report::{read_samples_jsonl, RunManifest, RunStatus, SAMPLES_CSV, SAMPLES_JSONL, SUMMARY_FILE, VARIANCE_TABLE};

const SMALL: &str = r#"{"alphas": [0.6666666666666666], "gamma": 1.0, "theta": 1.0, "kappa": 0.5,
    "n_schedule": [4, 8], "replicates": 100,
    "phi": {"centers": [0.0], "widths": [1.0], "amplitude": 1.0},
    "domain": {"particle_budget": 32}, "bootstrap_resamples": 100, "master_seed": 21}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_degenbranch"));
    c.env_remove("DEGENBRANCH_WORKERS");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn degenbranch")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn constants_prints_c1_record() {
    let out = run(bin().args(["constants", "--alphas", "0.5", "--gamma", "1", "--theta", "1", "--kappa", "0.5"]));
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"], "Critical");
    let c1 = v["c1"]["value"].as_f64().unwrap();
    assert!((c1 - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
    assert!((v["cubic_integral"]["closed_form"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn constants_intermediate_and_subcritical() {
    let out = run(bin().args(["constants", "--alphas", "0.6666666666666666"]));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["c2"]["value"].as_f64().unwrap() - 0.75f64.sqrt()).abs() < 1e-6);
    let out = run(bin().args(["constants", "--alphas", "1.5"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bar_alpha > 1"));
}

#[test]
fn invalid_kappa_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"kappa\": 0.5", "\"kappa\": 1.5"));
    let out = run(bin().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kappa") && err.contains("(0, 1)"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_and_missing_fields_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"gamma\"", "\"gamma_typo\""));
    let out = run(bin().arg("verify").arg("--config").arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma_typo"));
    let out = run(bin().args(["simulate", "--config", "/nonexistent/config.json"]));
    assert_eq!(out.status.code(), Some(1));
    let out = run(bin().args(["simulate"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_outputs_and_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("run");
    let out = run(bin().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(&out_dir).args(["--workers", "2"]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::read(&out_dir).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.workers, 2);
    assert_eq!(m.master_seed, 21);
    assert!(m.runtime_seconds.unwrap() >= 0.0);
    for f in [SAMPLES_JSONL, SUMMARY_FILE, VARIANCE_TABLE] {
        let d = m.outputs.iter().find(|o| o.file == f).unwrap();
        assert_eq!(d.bytes, std::fs::metadata(out_dir.join(f)).unwrap().len());
    }
    let records = read_samples_jsonl(&out_dir.join(SAMPLES_JSONL)).unwrap();
    assert_eq!(records.len(), 2 * 2 * 100 * 4);
    let line = std::fs::read_to_string(out_dir.join(SAMPLES_JSONL)).unwrap();
    let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    for key in ["n", "t", "replicate", "value", "L", "centering_mode", "accuracy_flag"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let table = std::fs::read_to_string(out_dir.join(VARIANCE_TABLE)).unwrap();
    assert!(table.lines().count() > 1);
}

#[test]
fn seed_override_and_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("csv");
    let out = run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--format", "csv", "--seed", "99"]));
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join(SAMPLES_CSV).exists());
    assert!(!out_dir.join(SAMPLES_JSONL).exists());
    let m = RunManifest::read(&out_dir).unwrap();
    assert_eq!(m.master_seed, 99);
    let mut rdr = csv::Reader::from_path(out_dir.join(SAMPLES_CSV)).unwrap();
    assert_eq!(rdr.records().count(), 2 * 2 * 100 * 4);
}

#[test]
fn workers_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("env");
    let out = run(bin()
        .env("DEGENBRANCH_WORKERS", "3")
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(RunManifest::read(&out_dir).unwrap().workers, 3);
}

#[test]
fn verify_prints_one_line_per_gate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = run(bin().arg("verify").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("v")));
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS mean_zero")), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
}
