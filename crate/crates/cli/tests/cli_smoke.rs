//! Exercises the installed binary surface: argument parsing, JSON outputs,
//! and exit codes.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tanntm"))
}

#[test]
fn preprocess_then_export_via_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    let mut train = String::new();
    for i in 0..40 {
        let words = if i % 2 == 0 {
            "rocket orbit launch satellite booster rocket orbit"
        } else {
            "striker goal match league coach striker goal"
        };
        train.push_str(&format!("\"{}\",\"Title\",\"{words}\"\n", i % 2 + 1));
    }
    fs::write(raw.join("train.csv"), &train).unwrap();
    fs::write(raw.join("test.csv"), &train).unwrap();

    let data = tmp.path().join("data");
    let out = bin()
        .args([
            "preprocess",
            "--dataset",
            "agnews",
            "--in",
            raw.to_str().unwrap(),
            "--out",
            data.to_str().unwrap(),
            "--seed",
            "3",
            "--tr-size",
            "40",
            "--num-below",
            "1",
            "--fr-abv",
            "1.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["train_docs"], 40);

    let model = tmp.path().join("model");
    let out = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--variant",
            "ttan",
            "--topics",
            "2",
            "--epochs",
            "2",
            "--seed",
            "3",
            "--out",
            model.to_str().unwrap(),
            "--no-glove",
            "--batch-size",
            "20",
            "--embed-dim",
            "6",
            "--hidden-dim",
            "8",
            "--attn-dim",
            "4",
            "--dropout",
            "0.0",
            "--threads",
            "1",
            "--eval-every",
            "0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let ckpt = model.join("final.ckpt");
    let out = bin()
        .args([
            "export-topics",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--top",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let tsv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(tsv.lines().count(), 2);

    let out = bin()
        .args([
            "eval-coherence",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--top",
            "4",
            "--window",
            "doc",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["mean_npmi"].as_f64().unwrap().abs() <= 1.0);
    assert_eq!(json["window"], "document");
}

#[test]
fn failures_exit_nonzero() {
    // Unknown dataset.
    let out = bin()
        .args([
            "preprocess", "--dataset", "nope", "--in", "/dev/null", "--out", "/tmp/x",
            "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // Missing checkpoint file.
    let out = bin()
        .args(["export-topics", "--checkpoint", "/definitely/not/here.ckpt"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // Bad window argument.
    let out = bin()
        .args([
            "eval-coherence",
            "--checkpoint",
            "/tmp/none.ckpt",
            "--data",
            "/tmp/none",
            "--window",
            "zero-ish",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_subcommand_executes_recipe() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    let mut rows = String::new();
    for i in 0..60 {
        let words = if i % 2 == 0 {
            "rocket orbit launch satellite booster module rocket fuel orbit launch"
        } else {
            "striker goal match league coach penalty striker stadium goal match"
        };
        rows.push_str(&format!("\"{}\",\"Title\",\"{words}\"\n", i % 2 + 1));
    }
    fs::write(raw.join("train.csv"), &rows).unwrap();
    fs::write(raw.join("test.csv"), &rows).unwrap();

    let artifacts = tmp.path().join("artifacts");
    let recipe = format!(
        r#"
name = "smoke"
seed = 4
dataset = "agnews"

[paths]
input = "{}"
artifacts = "{}"

[preprocess]
tr_size = 60
num_below = 1
fr_abv = 1.0

[model]
variant = "wtan"
topics = 2
embed_dim = 6
hidden_dim = 8
attn_dim = 4
dropout_rate = 0.0

[train]
epochs = 2
batch_size = 30
threads = 1
checkpoint_every = 0
eval_every = 0

[coherence]
top = 4
window = "doc"
"#,
        raw.display(),
        artifacts.display()
    );
    let recipe_path = tmp.path().join("smoke.toml");
    fs::write(&recipe_path, recipe).unwrap();

    let out = bin()
        .args(["run", "--config", recipe_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["variants"][0]["variant"], "wtan");
    assert!(artifacts.join("wtan").join("final.ckpt").exists());

    // Second invocation with --resume skips everything and still exits zero.
    let out = bin()
        .args(["run", "--config", recipe_path.to_str().unwrap(), "--resume"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["skipped_stages"].as_array().unwrap().len(), 4);

    // A recipe with a missing input path exits nonzero.
    let bad = recipe_path.to_str().unwrap();
    let bad_recipe = fs::read_to_string(bad)
        .unwrap()
        .replace(&raw.display().to_string(), "/definitely/not/here");
    let bad_path = tmp.path().join("bad.toml");
    fs::write(&bad_path, bad_recipe).unwrap();
    let out = bin()
        .args(["run", "--config", bad_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
