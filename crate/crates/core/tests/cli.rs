use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn qidd(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qidd"));
    cmd.args(args).env_remove("QIDD_OUTPUT_ROOT");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_crystal_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    fs::write(&config, r#"{"sim": {"gamma": 0.05}}"#).unwrap();
    let out = qidd(&["laue", "--config", config.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crystal.D required"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    fs::write(&config, r#"{"crystal": {"D": 1.0, "thickness": 2}}"#).unwrap();
    let out = qidd(&["bragg", "--config", config.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thickness"));
}

#[test]
fn gamma_and_layers_are_exclusive() {
    let out = qidd(&["laue", "--gamma", "0.01", "--layers", "100"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn laue_preset_records_the_thickness() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&mut qidd(&["laue", "--out", tmp.path().to_str().unwrap()]));
    let m = manifest(tmp.path());
    let n_gamma = m["resolved"]["n_gamma"].as_f64().unwrap();
    assert!((n_gamma / (PI / 2.0 * 100.0) - 1.0).abs() <= 1e-12);
    assert!(m["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    for file in [
        "profiles/diffracted.csv",
        "profiles/transmitted.csv",
        "profiles/integrated.csv",
        "fields/transmitted.csv",
        "fields/reflected.csv",
    ] {
        assert!(tmp.path().join(file).is_file(), "{file}");
    }
    let profile = fs::read_to_string(tmp.path().join("profiles/diffracted.csv")).unwrap();
    assert!(profile.lines().next().unwrap().ends_with(",value"));
}

#[test]
fn manifest_lists_resolved_parameters_and_hashed_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&mut qidd(&["bragg", "--out", tmp.path().to_str().unwrap()]));
    let m = manifest(tmp.path());
    let resolved = &m["resolved"];
    for key in ["n", "gamma", "dx_m", "dz_m", "delta_h_m", "theta_d_rad"] {
        let v = resolved[key].as_f64().unwrap_or_else(|| panic!("{key} missing"));
        assert!(v.is_finite() && v > 0.0, "{key} = {v}");
    }
    assert!(m["wall_time_s"].as_f64().is_some());
    assert_eq!(m["scenario"], "bragg");
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for file in outputs {
        let bytes = fs::read(tmp.path().join(file["path"].as_str().unwrap())).unwrap();
        assert_eq!(file["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(file["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let hashes: Vec<Value> = ["1", "3", "8"]
        .iter()
        .map(|threads| {
            let dir = tmp.path().join(threads);
            run_ok(&mut qidd(&["mixed", "--threads", threads, "--out", dir.to_str().unwrap()]));
            manifest(&dir)["content_hash"].clone()
        })
        .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(qidd(&["bragg", "--gamma", "0.1"]).env("QIDD_OUTPUT_ROOT", tmp.path()));
    let m = manifest(&tmp.path().join("bragg"));
    assert_eq!(m["config"]["sim"]["gamma"].as_f64(), Some(0.1));
}

#[test]
fn oracle_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_ok(&mut qidd(&["oracle-check", "--out", tmp.path().to_str().unwrap()]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert!(tmp.path().join("profiles/oracle_checks.csv").is_file());
}

#[test]
fn config_file_overrides_and_relative_data_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = tmp.path().join("synth");
    run_ok(&mut qidd(&["fit", "--out", synth.to_str().unwrap()]));
    fs::copy(synth.join("profiles/data.csv"), tmp.path().join("measured.csv")).unwrap();
    let config = tmp.path().join("fit.json");
    fs::write(
        &config,
        r#"{
            "crystal": {"material": "si111", "D": 1.0, "lambda": 4.43, "theta_B": 44.9},
            "sim": {"gamma": 0.0628},
            "geometry": {"back_face_angle": 91.35},
            "kernel": {"fwhm": 0.13},
            "data": {"path": "measured.csv", "unit": "meters"},
            "fit": {"lo": 91.0, "hi": 91.7, "steps": 8},
            "io": {"fields": false}
        }"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("fit");
    run_ok(&mut qidd(&["fit", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let m = manifest(&out_dir);
    assert_eq!(m["results"]["data"], "file");
    let best = m["results"]["best_angle_deg"].as_f64().unwrap();
    assert!((best - 91.35).abs() <= 0.1, "{best}");
    assert_eq!(m["config"]["sim"]["gamma"].as_f64(), Some(0.0628));
}
