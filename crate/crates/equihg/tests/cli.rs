//! End-to-end checks of the `equihg` binary: exit codes, stream separation,
//! and the shape of what lands on disk.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equihg"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_always_exits_zero() {
    for args in [
        vec!["--help"],
        vec!["convert", "--help"],
        vec!["inspect", "--help"],
        vec!["train", "--help"],
        vec!["eval", "--help"],
        vec!["check", "--help"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        assert!(!stdout(&out).is_empty(), "{args:?} printed nothing");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn convert_emits_one_json_line_per_molecule() {
    let dir = tempfile::tempdir().unwrap();
    let smi = dir.path().join("in.smi");
    std::fs::write(&smi, "c1ccccc1 benzene\nCCO ethanol\n").unwrap();
    let out = bin().args(["convert"]).arg(&smi).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    // benzene: one hyperedge covering the six ring carbons
    assert_eq!(first["hyperedges"], serde_json::json!([[0, 1, 2, 3, 4, 5]]));
    let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(second["hyperedges"], serde_json::json!([]));
}

#[test]
fn convert_empty_input_succeeds_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let smi = dir.path().join("empty.smi");
    std::fs::write(&smi, "").unwrap();
    let out = bin().args(["convert"]).arg(&smi).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn convert_corrupt_sdf_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let sdf = dir.path().join("bad.sdf");
    std::fs::write(&sdf, "mol\n  prog\n\nnot a counts line\n").unwrap();
    let out = bin().args(["convert"]).arg(&sdf).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains(":4:"), "missing line number: {err}");
}

#[test]
fn convert_keeps_good_records_and_fails_on_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let smi = dir.path().join("mixed.smi");
    std::fs::write(&smi, "CCO good\nC1CC nope\nC=O also_good\n").unwrap();
    let out = bin().args(["convert"]).arg(&smi).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out).lines().count(), 2, "good records still convert");
    let err = stderr(&out);
    assert!(err.contains(":2:") && err.contains("C1CC"), "bad record not located: {err}");
    assert!(err.contains("1 record(s) failed"), "no summary: {err}");
}

#[test]
fn inspect_summarizes_each_molecule() {
    let dir = tempfile::tempdir().unwrap();
    let smi = dir.path().join("in.smi");
    std::fs::write(&smi, "c1ccccc1 benzene\n").unwrap();
    let out = bin().args(["inspect"]).arg(&smi).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("benzene: atoms=12 bonds=12 hyperedges=1"),
        "unexpected summary: {text}"
    );
}

fn train_args(out_dir: &Path, epochs: &str) -> Vec<String> {
    [
        "train",
        "--molecules",
        data_dir().join("molecules.sdf").to_str().unwrap(),
        "--targets",
        data_dir().join("targets.csv").to_str().unwrap(),
        "--n",
        "64",
        "--kind",
        "mhnn",
        "--hidden",
        "8",
        "--epochs",
        epochs,
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn train_writes_one_metrics_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(train_args(dir.path(), "5")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_mae");
    assert_eq!(lines.len(), 1 + 5, "header plus one row per epoch");
    assert!(dir.path().join("best.ckpt").exists());
    let text = stdout(&out);
    assert!(text.contains("best checkpoint:"), "missing summary: {text}");
}

#[test]
fn eval_rejects_a_checkpoint_of_the_wrong_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(train_args(dir.path(), "1")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let ckpt = dir.path().join("best.ckpt");
    let out = bin()
        .args(["eval"])
        .arg(&ckpt)
        .args([
            "--kind",
            "gin",
            "--molecules",
            data_dir().join("molecules.sdf").to_str().unwrap(),
            "--targets",
            data_dir().join("targets.csv").to_str().unwrap(),
            "--n",
            "64",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("model kind mismatch"),
        "unexpected error: {}",
        stderr(&out)
    );
}

#[test]
fn eval_writes_a_json_report_next_to_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(train_args(dir.path(), "2")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let out = bin()
        .args(["eval"])
        .arg(dir.path().join("best.ckpt"))
        .args([
            "--split",
            "val",
            "--molecules",
            data_dir().join("molecules.sdf").to_str().unwrap(),
            "--targets",
            data_dir().join("targets.csv").to_str().unwrap(),
            "--n",
            "64",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval_val.json")).unwrap())
            .unwrap();
    assert_eq!(report["split"], "val");
    assert_eq!(report["target"], "gap");
    assert!(report["mae"].as_f64().unwrap().is_finite());
}

#[test]
fn train_without_a_molecule_source_is_a_config_error() {
    let out = bin().args(["train", "--epochs", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("no molecule source configured"),
        "unexpected error: {}",
        stderr(&out)
    );
}

#[test]
fn check_reports_deviation_and_tolerance() {
    let out = bin()
        .args(["check", "permutation", "--model", "gin", "--n", "3", "--molecules"])
        .arg(data_dir().join("molecules.sdf"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("permutation (gin): max deviation"), "{text}");
    assert!(text.contains("-> ok"), "{text}");
}

#[test]
fn config_file_drives_training_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "[model]\nkind = mhnn\nhidden = 8\n\n[train]\nepochs = 7\nout_dir = {}\n\n\
             [data]\nmolecules = {}\ntargets = {}\nn = 64\n",
            dir.path().display(),
            data_dir().join("molecules.sdf").display(),
            data_dir().join("targets.csv").display(),
        ),
    )
    .unwrap();
    // --epochs beats the file's epochs = 7
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--epochs", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2);
}
