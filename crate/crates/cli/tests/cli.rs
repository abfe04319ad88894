//! End-to-end checks of the binary: config parsing, exit codes, artifact
//! layout and byte-level determinism of the reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn imgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imgap"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).expect("config written");
    path.to_string_lossy().into_owned()
}

#[test]
fn gap_check_on_the_example_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "gap.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": [1.0, 4.0]}},
            "L": 0.5
        }"#,
    );
    let out = imgap(&["gap-check", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let reports = value["reports"].as_array().unwrap();
    let jordan_full = reports
        .iter()
        .find(|r| r["kind"]["kind"] == "jordan_full")
        .expect("jordan_full report present");
    let lhs = jordan_full["lhs"].as_f64().unwrap();
    assert!((lhs - 0.737034).abs() < 1e-5, "lhs = {lhs}");
    assert_eq!(jordan_full["satisfied"], serde_json::Value::Bool(true));
}

#[test]
fn operator_norm_closed_form_vs_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "norm.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": [1.0, 4.0]}},
            "n": 1
        }"#,
    );
    let out = imgap(&["operator-norm", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let closed = value["results"]["full"]["closed"]["norm"].as_f64().unwrap();
    assert!((closed - 1.356789).abs() < 1e-5);
    let dev = value["results"]["full"]["relative_deviation"]
        .as_f64()
        .unwrap();
    assert!(dev < 1e-6);
    let trunc = value["results"]["truncated"]["closed"]["norm"]
        .as_f64()
        .unwrap();
    assert!((trunc - 1.0).abs() < 1e-12);
}

#[test]
fn empty_ladder_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "empty.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": []}},
            "L": 0.5
        }"#,
    );
    let out = imgap(&["gap-check", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_fields_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": [1.0, 4.0]}},
            "L": 0.5,
            "lipshitz": 0.7
        }"#,
    );
    let out = imgap(&["gap-check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("lipshitz"),
        "diagnostic names the field: {stderr}"
    );
}

#[test]
fn missing_config_is_a_schema_error() {
    let out = imgap(&["gap-check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn counterexample_artifacts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ce.json",
        r#"{
            "lambda_n": 1.0,
            "lambda_np1": 4.0,
            "epsilon": 0.01,
            "mode": "truncated"
        }"#,
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = imgap(&[
            "counterexample",
            "--config",
            &cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let json_a = fs::read(out_a.join("counterexample.json")).unwrap();
    let json_b = fs::read(out_b.join("counterexample.json")).unwrap();
    assert_eq!(json_a, json_b, "reports must be byte-identical");
    let spiral_a = fs::read(out_a.join("spiral.csv")).unwrap();
    let spiral_b = fs::read(out_b.join("spiral.csv")).unwrap();
    assert_eq!(spiral_a, spiral_b);

    let value: serde_json::Value = serde_json::from_slice(&json_a).unwrap();
    assert!((value["instance"]["coupling"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(value["oscillation"]["zero_count"].as_u64().unwrap() >= 6);
    assert_eq!(
        value["oscillation"]["verdict"],
        serde_json::Value::Bool(true)
    );
    assert_eq!(value["seed"].as_u64(), Some(7));
}

#[test]
fn build_manifold_reports_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "manifold.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": [1.0, 4.0, 9.0, 16.0]}},
            "n": 2,
            "nonlinearity": {"kind": "mixing_tanh", "L": 0.3, "form": "general"},
            "samples": 4
        }"#,
    );
    let out = imgap(&["build-manifold", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(value["base_dimension"].as_u64(), Some(4));
    assert_eq!(value["samples"].as_array().unwrap().len(), 4);
    let bound = value["lipschitz_bound"].as_f64().unwrap();
    let ratio = value["sampled_lipschitz_ratio"].as_f64().unwrap();
    assert!(ratio <= bound + 0.05, "ratio {ratio} vs bound {bound}");
}

#[test]
fn gap_violation_still_exits_one_for_build_manifold() {
    let dir = tempfile::tempdir().unwrap();
    // L = 2 violates the gap at (1, 4): L·‖𝕃‖ > 1, construction must fail
    let cfg = write_config(
        dir.path(),
        "violated.json",
        r#"{
            "ladder": {"generator": {"kind": "explicit", "values": [1.0, 4.0]}},
            "n": 1,
            "nonlinearity": {"kind": "mixing_tanh", "L": 2.0, "form": "general"}
        }"#,
    );
    let out = imgap(&["build-manifold", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("gap"),
        "names the failing premise: {stderr}"
    );
}
