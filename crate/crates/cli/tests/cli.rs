//! End-to-end smoke tests driving the compiled `sgp` binary.

use std::path::Path;
use std::process::{Command, Output};

fn sgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn sgp_ok(dir: &Path, args: &[&str]) -> String {
    let out = sgp(dir, args);
    assert!(
        out.status.success(),
        "`sgp {}` failed:\nstdout: {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sgp_ok(d, &["gen-data", "--n", "20", "--m-max", "4", "--seed", "9", "--out", "a.jsonl"]);
    sgp_ok(d, &["gen-data", "--n", "20", "--m-max", "4", "--seed", "9", "--out", "b.jsonl"]);
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    let b = std::fs::read(d.join("b.jsonl")).unwrap();
    assert_eq!(a, b, "same seed must produce identical corpora");
    assert!(!a.is_empty());
}

#[test]
fn full_workflow_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sgp_ok(
        d,
        &[
            "gen-data",
            "--n",
            "30",
            "--m-max",
            "4",
            "--node-labels",
            "2",
            "--edge-labels",
            "2",
            "--seed",
            "5",
            "--out",
            "corpus.jsonl",
        ],
    );

    // Pre-train briefly, then fine-tune from that checkpoint.
    let small = [
        "--layers", "1", "--hidden", "8", "--dim", "8", "--batch", "4", "--eval-every", "5",
        "--patience", "3", "--seed", "1",
    ];
    let mut args = vec![
        "pretrain-output",
        "--data",
        "corpus.jsonl",
        "--steps",
        "6",
        "--out",
        "pre.ckpt",
    ];
    args.extend_from_slice(&small);
    sgp_ok(d, &args);
    assert!(d.join("pre.ckpt").is_file());

    let mut args = vec![
        "train-output",
        "--data",
        "corpus.jsonl",
        "--pretrain-ckpt",
        "pre.ckpt",
        "--steps",
        "12",
        "--out",
        "emb.ckpt",
    ];
    args.extend_from_slice(&small);
    sgp_ok(d, &args);
    assert!(d.join("emb.ckpt").is_file());
    let progress = std::fs::read_to_string(d.join("emb.ckpt.progress.csv")).unwrap();
    assert!(progress.starts_with("step,train_loss,val_loss"), "progress CSV: {}", progress);
    assert!(progress.lines().count() > 1, "progress CSV has no data rows");

    sgp_ok(
        d,
        &[
            "train-regressor",
            "--data",
            "corpus.jsonl",
            "--embedder-ckpt",
            "emb.ckpt",
            "--layers",
            "1",
            "--width",
            "8",
            "--heads",
            "2",
            "--batch",
            "4",
            "--steps",
            "12",
            "--eval-every",
            "5",
            "--patience",
            "3",
            "--seed",
            "1",
            "--out",
            "reg.ckpt",
        ],
    );
    assert!(d.join("reg.ckpt").is_file());
    assert!(d.join("reg.ckpt.progress.csv").is_file());

    let stdout = sgp_ok(
        d,
        &["embed", "--embedder-ckpt", "emb.ckpt", "--data", "corpus.jsonl", "--out", "targets.bin"],
    );
    assert!(stdout.contains("30 graphs"), "embed output: {}", stdout);
    assert!(d.join("targets.bin").is_file());

    sgp_ok(
        d,
        &[
            "decode",
            "--input-data",
            "corpus.jsonl",
            "--regressor-ckpt",
            "reg.ckpt",
            "--embedder-ckpt",
            "emb.ckpt",
            "--candidates",
            "corpus.jsonl",
            "--strategy",
            "pgd-best",
            "--steps",
            "5",
            "--seed",
            "2",
            "--out",
            "preds.jsonl",
            "--trace",
            "trace.csv",
        ],
    );
    let preds = std::fs::read_to_string(d.join("preds.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 31, "header plus one record per input");
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.starts_with("example,iter,objective"), "trace CSV: {}", trace);
    // 30 examples × (5 descent steps + the initialization) plus the header.
    assert_eq!(trace.lines().count(), 1 + 30 * 6);

    let stdout = sgp_ok(
        d,
        &[
            "evaluate",
            "--predictions",
            "preds.jsonl",
            "--references",
            "corpus.jsonl",
            "--per-example",
            "per_example.csv",
        ],
    );
    assert!(stdout.contains("mean GED"), "evaluate output: {}", stdout);
    let per = std::fs::read_to_string(d.join("per_example.csv")).unwrap();
    assert_eq!(per.lines().count(), 31, "header plus one distance per example");
}

#[test]
fn evaluate_rejects_misaligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    sgp_ok(d, &["gen-data", "--n", "10", "--m-max", "4", "--seed", "1", "--out", "a.jsonl"]);
    sgp_ok(d, &["gen-data", "--n", "12", "--m-max", "4", "--seed", "1", "--out", "b.jsonl"]);
    let out = sgp(d, &["evaluate", "--predictions", "a.jsonl", "--references", "b.jsonl"]);
    assert!(!out.status.success(), "length mismatch must be rejected");
}

#[test]
fn run_experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"
[data]
n_train = 16
n_val = 4
n_test = 4
m_max = 4
node_labels = 2
edge_labels = 2

[embedder]
layers = 1
hidden = 8
dim = 8

[contrastive]
batch_size = 4
max_steps = 10
eval_every = 5
patience = 2
seed = 1

[regressor]
layers = 1
width = 8
heads = 2
batch_size = 4
max_steps = 10
eval_every = 5

[decode]
eta = 1.0
steps = 4

[experiment]
seeds = [1]
strategies = ["candidate", "pgd-best"]
candidate_ratios = [1.0]
"#;
    std::fs::write(d.join("experiment.toml"), config).unwrap();
    let stdout = sgp_ok(d, &["run-experiment", "--config", "experiment.toml", "--out", "report"]);
    assert!(stdout.contains("reports written"), "experiment output: {}", stdout);
    for name in ["report.csv", "aggregate.csv", "plot_ged.csv", "plot_perfect.csv", "summary.txt"] {
        assert!(d.join("report").join(name).is_file(), "{} missing", name);
    }
    let summary = std::fs::read_to_string(d.join("report").join("summary.txt")).unwrap();
    assert!(summary.contains("2.252"), "summary lacks the reference scale:\n{}", summary);
}
