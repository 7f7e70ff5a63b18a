//! Process-level contract of the scenario binary: exit codes, error
//! messages, and emitted files.

use std::path::{Path, PathBuf};
use std::process::Command;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(sub)
}

#[test]
fn invalid_radial_exponent_exits_2_and_names_the_rule() {
    let out = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .args(["run", "--config"])
        .arg(config_dir().join("invalid_gamma_zero.toml"))
        .arg("--out-dir")
        .arg(tmp("cli_invalid"))
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("gamma = 0"), "stderr: {stderr}");
    assert!(
        stderr.contains("(-inf, -2)") && stderr.contains("(0, inf)"),
        "stderr must name the admissible range: {stderr}"
    );
}

#[test]
fn missing_config_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .args(["run", "--config"])
        .arg(config_dir().join("no_such_file.toml"))
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn incompatible_sweep_axis_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .args(["sweep", "--axis", "epsilon", "--config"])
        .arg(config_dir().join("limit_n1_verify.toml"))
        .arg("--out-dir")
        .arg(tmp("cli_axis"))
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not supported"), "stderr: {stderr}");
}

#[test]
fn run_emits_report_and_csv_with_provenance_column() {
    let dir = tmp("cli_weights");
    let status = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .args(["run", "--config"])
        .arg(config_dir().join("weights.toml"))
        .arg("--out-dir")
        .arg(&dir)
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("checks.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("name,computed,predicted,tolerance,pass,provenance")
    );
    assert!(csv.contains("PAPER") && csv.contains("DERIVED"));
    let report = std::fs::read_to_string(dir.join("report.json")).unwrap();
    assert!(report.contains("\"verdict\": true"));
    assert!(report.contains("\"resolution\""));
}

#[test]
fn sweep_rows_follow_the_axis_order() {
    let dir = tmp("cli_sweep_r");
    let status = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .args(["sweep", "--axis", "r", "--config"])
        .arg(config_dir().join("sharpness.toml"))
        .arg("--out-dir")
        .arg(&dir)
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("sweep_r.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "radius,value");
    let radii: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(radii, vec![8.0, 16.0, 32.0, 64.0]);
    let values: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
}

#[test]
fn thread_env_override_is_accepted() {
    let dir = tmp("cli_threads");
    let status = Command::new(env!("CARGO_BIN_EXE_bsvylab"))
        .env("BSVYLAB_THREADS", "1")
        .args(["run", "--config"])
        .arg(config_dir().join("spaces.toml"))
        .arg("--out-dir")
        .arg(&dir)
        .arg("--threads")
        .arg("4")
        .status()
        .expect("spawn");
    assert_eq!(status.code(), Some(0));
}
