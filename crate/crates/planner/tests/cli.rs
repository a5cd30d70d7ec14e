//! End-to-end checks of the binary: exit codes, manifests, and
//! byte-identical reruns.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genplanner"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn gen_small(dir: &Path) {
    ok(
        &[
            "gen-data", "--size", "8", "--train", "24", "--eval", "6", "--min-path-len", "2",
            "--seed", "3", "--out", "mazes.gpln",
        ],
        dir,
    );
}

fn train_small(dir: &Path, variant: &str, out: &str) {
    ok(
        &[
            "train", "--variant", variant, "--data", "mazes.gpln", "--epochs", "1", "--batch",
            "8", "--base-channels", "8", "--seed", "5", "--out", out,
        ],
        dir,
    );
}

#[test]
fn missing_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-data", "--size", "8", "--train", "4", "--eval", "2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_variant_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["train", "--variant", "gan", "--data", "x.gpln", "--out", "m.gpck"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "train", "--variant", "flow", "--data", "nope.gpln", "--epochs", "1", "--out",
            "m.gpck",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path());
    let first = std::fs::read(dir.path().join("mazes.gpln")).unwrap();
    assert!(dir.path().join("mazes.gpln.manifest.json").exists());

    gen_small(dir.path());
    let second = std::fs::read(dir.path().join("mazes.gpln")).unwrap();
    assert_eq!(first, second, "same args produced different dataset bytes");
}

#[test]
fn train_sample_eval_rerun_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_small(d);

    train_small(d, "flow", "flow.gpck");
    let ckpt1 = std::fs::read(d.join("flow.gpck")).unwrap();
    let loss1 = std::fs::read(d.join("flow.gpck.loss.json")).unwrap();
    train_small(d, "flow", "flow.gpck");
    assert_eq!(ckpt1, std::fs::read(d.join("flow.gpck")).unwrap());
    assert_eq!(loss1, std::fs::read(d.join("flow.gpck.loss.json")).unwrap());

    let sample_args = [
        "sample", "--checkpoint", "flow.gpck", "--data", "mazes.gpln", "--maze-index", "0",
        "--steps", "4", "--seed", "9", "--dump-intermediates", "--out", "plan.png",
    ];
    ok(&sample_args, d);
    assert!(d.join("plan_frame003.png").exists());
    assert!(d.join("plan_truth.png").exists());
    assert!(d.join("plan.png.manifest.json").exists());
    let png1 = std::fs::read(d.join("plan.png")).unwrap();
    ok(&sample_args, d);
    assert_eq!(png1, std::fs::read(d.join("plan.png")).unwrap());

    let eval_args = [
        "eval", "--checkpoint", "flow.gpck", "--data", "mazes.gpln", "--steps", "4", "--seed",
        "9", "--out", "eval.json",
    ];
    ok(&eval_args, d);
    let json1 = std::fs::read(d.join("eval.json")).unwrap();
    ok(&eval_args, d);
    assert_eq!(json1, std::fs::read(d.join("eval.json")).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&json1).unwrap();
    assert_eq!(report["model"], "flow");
    assert_eq!(report["per_sample"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_and_ablate_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_small(d);
    train_small(d, "diff", "diff.gpck");

    ok(
        &[
            "sweep", "--checkpoint", "diff.gpck", "--data", "mazes.gpln", "--steps", "4,1",
            "--seed", "2", "--out", "sweep.json",
        ],
        d,
    );
    let rows: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["steps"], 4);
    assert_eq!(rows[1]["steps"], 1);

    ok(
        &[
            "ablate", "--variant", "cnn", "--data", "mazes.gpln", "--channels", "none,full",
            "--epochs", "1", "--batch", "8", "--base-channels", "8", "--seed", "4", "--out",
            "ablate.json",
        ],
        d,
    );
    let rows: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("ablate.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["model"], "cnn-none");
    assert_eq!(rows[1]["model"], "cnn-full");
    assert!(d.join("ablate.json.manifest.json").exists());
}

#[test]
fn baseline_sample_ignores_steps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    gen_small(d);
    train_small(d, "cnn", "cnn.gpck");
    ok(
        &[
            "sample", "--checkpoint", "cnn.gpck", "--data", "mazes.gpln", "--out", "cnn.png",
        ],
        d,
    );
    assert!(d.join("cnn.png").exists());
}
