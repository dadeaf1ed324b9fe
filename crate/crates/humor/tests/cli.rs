mod common;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use humor::files;
use humor_core::corpus::{Label, LabeledExample, Variant};
use humor_core::synthetic::pun_marker_dataset;

fn humor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_humor"))
        .args(args)
        .env_remove("HUMOR_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = humor(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"{
  "model": {"kind": "transformer", "max_seq_len": 24, "model_dim": 8, "num_heads": 2, "num_layers": 1, "ffn_dim": 16},
  "train": {"learning_rate": 0.01, "max_epochs": 2, "batch_size": 8}
}"#;

/// Writes train/validation/test CSVs of the marker task and a tiny config.
fn tiny_setup(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let data = pun_marker_dataset(120, 3);
    let paths: Vec<PathBuf> = ["train", "validation", "test"]
        .iter()
        .map(|n| dir.join(format!("{n}.csv")))
        .collect();
    files::write_dataset(&paths[0], &data[..80]).unwrap();
    files::write_dataset(&paths[1], &data[80..100]).unwrap();
    files::write_dataset(&paths[2], &data[100..]).unwrap();
    let cfg = dir.join("run.json");
    fs::write(&cfg, TINY).unwrap();
    (paths[0].clone(), paths[1].clone(), paths[2].clone(), cfg)
}

fn train_tiny(dir: &Path, seed: &str) -> PathBuf {
    let (train, val, _, cfg) = tiny_setup(dir);
    let run = dir.join("run");
    ok(&[
        "train",
        "--train",
        s(&train),
        "--validation",
        s(&val),
        "--out",
        s(&run),
        "--config",
        s(&cfg),
        "--seed",
        seed,
    ]);
    run
}

#[test]
fn help_lists_every_subcommand() {
    let help = ok(&["--help"]);
    for sub in [
        "ingest",
        "build-dataset",
        "match-negatives",
        "train",
        "evaluate",
        "transfer",
        "human-baseline",
        "predict",
        "report",
    ] {
        assert!(help.contains(sub), "{sub} missing from help");
    }
    assert!(ok(&["train", "--help"]).contains("--learning-rate"));
}

#[test]
fn unknown_flag_fails_with_usage_error() {
    let out = humor(&["build-dataset", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = humor(&[
        "build-dataset",
        "--store",
        "/nonexistent/jokes.jsonl",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[io]"), "{err}");
    assert!(err.contains("/nonexistent/jokes.jsonl"));
}

#[test]
fn invalid_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("jokes.jsonl");
    write_store(&store, &fixture_records()[..50]);
    let out = humor(&[
        "build-dataset",
        "--store",
        s(&store),
        "--out",
        s(dir.path()),
        "--split",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_fraction"));

    let (train, val, _, _) = tiny_setup(dir.path());
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"train": {"max_epochs": 0}}"#).unwrap();
    let out = humor(&[
        "train",
        "--train",
        s(&train),
        "--validation",
        s(&val),
        "--out",
        s(dir.path()),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_epochs"));
}

#[test]
fn build_dataset_writes_every_split_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("jokes.jsonl");
    write_store(&store, &fixture_records()[..2000]);
    let out = dir.path().join("data");
    ok(&[
        "build-dataset",
        "--store",
        s(&store),
        "--out",
        s(&out),
        "--seed",
        "3",
    ]);
    for v in ["body", "punchline", "full"] {
        for split in [
            "labeled",
            "train",
            "train_upsampled",
            "holdout",
            "holdout_balanced",
            "validation",
            "test",
        ] {
            assert!(
                out.join(v).join(format!("{split}.csv")).is_file(),
                "{v}/{split}"
            );
        }
    }
    let text = fs::read_to_string(out.join("full/test.csv")).unwrap();
    assert!(
        text.starts_with("\"id\",\"label\",\"text\"\n") || text.starts_with("id,label,text\n"),
        "{text:.40}"
    );
    let manifest: files::RunManifest = files::read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "build-dataset");
    assert_eq!(manifest.seeds, vec![3]);
    assert_eq!(
        manifest.inputs[0].sha256,
        files::file_digest(&store).unwrap()
    );
    assert_eq!(manifest.config["seed"], 3);
    assert!(manifest
        .outputs
        .iter()
        .any(|p| p.ends_with("full/train_upsampled.csv")));
}

#[test]
fn seed_comes_from_the_environment_too() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("jokes.jsonl");
    write_store(&store, &fixture_records()[..400]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "build-dataset",
        "--store",
        s(&store),
        "--out",
        s(&a),
        "--seed",
        "11",
        "--variant",
        "full",
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_humor"))
        .args([
            "build-dataset",
            "--store",
            s(&store),
            "--out",
            s(&b),
            "--variant",
            "full",
        ])
        .env("HUMOR_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(a.join("full/train.csv")).unwrap(),
        fs::read(b.join("full/train.csv")).unwrap()
    );
    assert!(!b.join("body").exists());
}

#[test]
fn train_writes_checkpoints_log_and_vocab() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let log: Vec<files::RunLogEntry> = files::read_jsonl(&run.join("run_log.jsonl")).unwrap();
    assert_eq!(log.len(), 2);
    for e in &log {
        assert!(run.join(&e.checkpoint_path).is_file());
        assert!(files::sidecar_path(&run.join(&e.checkpoint_path)).is_file());
    }
    assert!(run.join("vocab.txt").is_file());
    let vocab = fs::read_to_string(run.join("vocab.txt")).unwrap();
    assert!(vocab.lines().next().unwrap().starts_with('#'));
}

#[test]
fn evaluate_is_byte_identical_across_runs_and_reports_both_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let test = dir.path().join("test.csv");
    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    ok(&[
        "evaluate",
        "--run",
        s(&run),
        "--data",
        s(&test),
        "--out",
        s(&e1),
    ]);
    ok(&[
        "evaluate",
        "--run",
        s(&run),
        "--data",
        s(&test),
        "--out",
        s(&e2),
    ]);
    let m1 = fs::read(e1.join("metrics.json")).unwrap();
    assert_eq!(m1, fs::read(e2.join("metrics.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&m1).unwrap();
    assert_eq!(v["final"]["epoch"], 2);
    assert!(v["selected"]["metrics"]["accuracy"].is_number());
    let preds = fs::read_to_string(e1.join("predictions-final.csv")).unwrap();
    assert!(preds.starts_with("id,gold,pred,prob_positive\n"));
    assert_eq!(preds.lines().count(), 21);
}

#[test]
fn transfer_emits_the_four_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let out = dir.path().join("t");
    let ckpt = run.join("checkpoints/epoch-1.ckpt");
    ok(&[
        "transfer",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&dir.path().join("test.csv")),
        "--out",
        s(&out),
    ]);
    let v: serde_json::Value = files::read_json(&out.join("metrics.json")).unwrap();
    for k in ["accuracy", "precision", "recall", "f1"] {
        assert!(v[k].is_number(), "{k}");
    }
    let t: serde_json::Value = files::read_json(&out.join("transfer.json")).unwrap();
    assert_eq!(t["digest_before"], t["digest_after"]);
    assert_eq!(t["resampled"], false);
}

#[test]
fn checkpoint_with_a_foreign_vocabulary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let other = dir.path().join("other_vocab.txt");
    let vocab =
        humor_core::tokenizer::Vocabulary::build(&["completely different words"], 100, 1).unwrap();
    files::write_vocab(&other, &vocab).unwrap();
    let out = humor(&[
        "predict",
        "--checkpoint",
        s(&run.join("checkpoints/epoch-2.ckpt")),
        "--vocab",
        s(&other),
        "--input",
        s(&dir.path().join("test.csv")),
        "--out",
        s(&dir.path().join("p")),
    ]);
    assert_eq!(out.status.code(), Some(7));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&files::vocab_digest(&vocab)), "{err}");
}

#[test]
fn predict_labels_plain_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let input = dir.path().join("sentences.txt");
    fs::write(&input, "w1 w2 pun3 w4\n\nw5 w6 w7\n").unwrap();
    let out = dir.path().join("p");
    ok(&[
        "predict",
        "--checkpoint",
        s(&run.join("checkpoints/epoch-2.ckpt")),
        "--input",
        s(&input),
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(out.join("predictions.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("line-1,,"));
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn human_baseline_reports_the_funny_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann.csv");
    fs::write(
        &ann,
        "item_id,annotator_id,label\na,u1,1\na,u2,1\na,u3,0\nb,u1,1\nb,u2,0\nc,u1,0\n",
    )
    .unwrap();
    let out = dir.path().join("h");
    let stdout = ok(&["human-baseline", "--annotations", s(&ann), "--out", s(&out)]);
    assert!(stdout.contains("3 items"));
    let v: serde_json::Value = files::read_json(&out.join("human.json")).unwrap();
    assert!((v["fraction_funny"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["ties"], 1);
}

#[test]
fn malformed_annotation_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann.csv");
    fs::write(&ann, "item_id,annotator_id,label\na,u1,1\na,u2,yes\n").unwrap();
    let out = humor(&[
        "human-baseline",
        "--annotations",
        s(&ann),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn match_negatives_writes_sentences_and_bin_report() {
    let dir = tempfile::tempdir().unwrap();
    let jokes = dir.path().join("jokes.txt");
    let corpus = dir.path().join("corpus.txt");
    let joke_lines: Vec<String> = (0..40)
        .map(|i| "word ".repeat(2 + i % 6).trim().to_string())
        .collect();
    let corpus_lines: Vec<String> = (0..600)
        .map(|i| "news ".repeat(1 + i % 9).trim().to_string())
        .collect();
    files::write_lines(&jokes, &joke_lines).unwrap();
    files::write_lines(&corpus, &corpus_lines).unwrap();
    let out = dir.path().join("neg");
    ok(&[
        "match-negatives",
        "--jokes",
        s(&jokes),
        "--corpus",
        s(&corpus),
        "--out",
        s(&out),
        "--count",
        "30",
        "--seed",
        "2",
    ]);
    assert_eq!(
        files::read_lines(&out.join("negatives.txt")).unwrap().len(),
        30
    );
    let report: serde_json::Value = files::read_json(&out.join("negatives.report.json")).unwrap();
    let filled: u64 = report["bins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["filled"].as_u64().unwrap())
        .sum();
    assert_eq!(filled, 30);
}

#[test]
fn ingest_once_against_a_mock_server() {
    let page = listing(
        vec![
            post_json("p1", "setup one", "punch one", 276, 100),
            post_json("p2", "setup two", "", 28315, 200),
        ],
        Some("t3_p2"),
    );
    let mut routes = HashMap::from([("/new.json?limit=10".to_string(), (200, page))]);
    routes.insert(
        "/by_id/p1.json".into(),
        (
            200,
            listing(
                vec![post_json("p1", "setup one", "punch one", 300, 100)],
                None,
            ),
        ),
    );
    let server = MockServer::start(routes);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ingest.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"api_base_url": "{}", "page_size": 10, "max_retries": 0}}"#,
            server.base
        ),
    )
    .unwrap();
    let store = dir.path().join("jokes.jsonl");
    let stdout = ok(&[
        "ingest",
        "--config",
        s(&cfg),
        "--store",
        s(&store),
        "--once",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["new_records"], 2);
    assert_eq!(report["refresh"]["absent"], serde_json::json!(["p2"]));
    let loaded = humor::store::load(&store).unwrap();
    assert_eq!(loaded.get("p1").unwrap().score, 300);
    assert_eq!(loaded.get("p2").unwrap().score, 28315);
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn report_renders_both_table_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_tiny(dir.path(), "4");
    let ann = dir.path().join("ann.csv");
    fs::write(&ann, "item_id,annotator_id,label\na,u1,1\nb,u1,0\n").unwrap();
    let puns: Vec<LabeledExample> = pun_marker_dataset(10, 9)
        .into_iter()
        .map(|mut e| {
            e.variant = Variant::Full;
            e
        })
        .collect();
    files::write_dataset(&dir.path().join("puns.csv"), &puns).unwrap();
    assert!(puns.iter().any(|e| e.label == Label::Funny));
    let spec = serde_json::json!({
        "variant_tables": [{"title": "Accuracy by variant", "rows": [
            {"method": "Transformer", "full": {"checkpoint": "run/checkpoints/epoch-2.ckpt", "data": "test.csv"}},
            {"method": "Human", "full": {"annotations": "ann.csv"}}
        ]}],
        "metric_tables": [{"title": "Puns", "data": "puns.csv", "rows": [
            {"method": "Transformer", "checkpoint": "run/checkpoints/epoch-2.ckpt"}
        ]}]
    });
    let spec_path = dir.path().join("report.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let out = dir.path().join("rep");
    let md = ok(&["report", "--spec", s(&spec_path), "--out", s(&out)]);
    assert!(md.contains("| Method | Body | Punchline | Full |"));
    assert!(md.contains("| Human | n/a | n/a | 0.500 |"));
    assert!(md.contains("| Method | Accuracy | Precision | Recall | F1 |"));
    assert!(run.is_dir());
    assert_eq!(fs::read_to_string(out.join("report.md")).unwrap(), md);
}
