use std::path::Path;
use std::process::{Command, Output};

use degenctrl_cli::config::{RunConfig, Subcommand};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenctrl"))
        .current_dir(dir)
        .env_remove("DEGENCTRL_PRECISION")
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn control_writes_samples_with_zero_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["control", "--alpha", "0", "--mu", "0", "--T", "1", "--side", "right", "--N", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2048);
    let first: Vec<f64> = rows[0].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[2], 0.0);
    let last: Vec<f64> = rows[2047].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
}

#[test]
fn verify_passes_on_classical_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["verify", "--N", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_reports_failure_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["verify", "--side", "left", "--mu", "-5", "--N", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("projection_identity"));
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn invalid_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["spectrum", "--alpha", "1.0"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["control", "--side", "left", "--mu", "0.25"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["gaps", "--N", "0"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["spectrum", "--bogus", "1"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "alpha=0.3\nbeta=2\n").unwrap();
    let out = bin(dir.path(), &["spectrum", "--config", "run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "alpha=0.3\nmu=-1\nN=6\n").unwrap();
    let out = bin(dir.path(), &["spectrum", "--config", "run.cfg", "--N", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let cfg = RunConfig::from_csv_header(&csv).unwrap();
    assert_eq!((cfg.alpha, cfg.mu, cfg.modes), (0.3, -1.0, 4));
    assert_eq!(data_rows(&csv).len(), 4);
}

#[test]
fn config_file_for_other_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "subcommand=gaps\n").unwrap();
    assert_eq!(bin(dir.path(), &["spectrum", "--config", "run.cfg"]).status.code(), Some(2));
}

#[test]
fn precision_from_environment_yields_to_flag() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_degenctrl"))
            .current_dir(dir.path())
            .env("DEGENCTRL_PRECISION", "extended")
            .args(["spectrum", "--N", "3"])
            .args(extra)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        RunConfig::from_csv_header(&std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap()).unwrap()
    };
    assert_eq!(run(&[]).precision.to_string(), "extended");
    assert_eq!(run(&["--precision", "base"]).precision.to_string(), "base");
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--alpha", "0.4", "--mu", "-0.5", "--N", "8", "--format", "json", "--seed", "7"];
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("simulate.json")).unwrap();
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    let b = std::fs::read(dir.path().join("simulate.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gaps", "--alpha", "0.6", "--mu", "-2", "--N", "9", "--format", "json"];
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("gaps.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let cfg: RunConfig = serde_json::from_value(doc["config"].clone()).unwrap();
    assert_eq!(cfg.subcommand, Subcommand::Gaps);
    std::fs::write(dir.path().join("replay.cfg"), cfg.to_kv()).unwrap();
    assert_eq!(bin(dir.path(), &["gaps", "--config", "replay.cfg"]).status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("gaps.json")).unwrap(), first);

    assert_eq!(bin(dir.path(), &["control", "--N", "6", "--T", "0.5"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
    let cfg = RunConfig::from_csv_header(&csv).unwrap();
    assert_eq!((cfg.modes, cfg.horizon), (6, 0.5));
    std::fs::write(dir.path().join("replay.cfg"), cfg.to_kv()).unwrap();
    assert_eq!(bin(dir.path(), &["control", "--config", "replay.cfg"]).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("control.csv")).unwrap(), csv);
}

#[test]
fn left_sweep_omits_critical_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["cost-sweep", "--grid", "default", "--side", "left", "--N", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("cost-sweep.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 18);
    assert_eq!(csv.lines().filter(|l| l.starts_with("# skipped:")).count(), 9);
}
