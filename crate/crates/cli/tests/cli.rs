use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use unravel_core::eval::Report;
use unravel_core::rnn::{read_checkpoint, Dims, LstmModel};

fn unravel(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unravel"))
        .args(args)
        .arg("--out-dir")
        .arg(out_dir)
        .env_remove("UNRAVEL_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out_dir: &Path, args: &[&str]) -> String {
    let out = unravel(out_dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(out_dir: &Path, args: &[&str], code: i32) -> String {
    let out = unravel(out_dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error kind="), "{stderr}");
    stderr
}

const SMALL: &[&str] = &["--keyword-docs", "100", "--distractor-docs", "40"];

fn synth_small(dir: &Path) {
    let mut args = vec!["synth"];
    args.extend_from_slice(SMALL);
    ok(dir, &args);
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    let meta = Report::parse(&fs::read_to_string(d.join("corpus_meta.txt")).unwrap()).unwrap();
    assert_eq!(meta.get("corpus", "documents"), Some("140"));
    assert_eq!(meta.get("splits", "train"), Some("112"));

    let summary = ok(d, &["train", "--hidden", "50", "--embed", "50", "--epochs", "2"]);
    assert!(summary.contains("test_accuracy="), "{summary}");
    let metrics = fs::read_to_string(d.join("train_metrics.tsv")).unwrap();
    assert!(metrics.contains("epoch\ttrain_loss\ttrain_accuracy\tvalid_accuracy\n1\t"));

    let summary = ok(d, &["saliency", "--pool", "dot", "--eval-gold"]);
    assert!(summary.contains("mean_topk_gold_accuracy="), "{summary}");
    assert!(d.join("saliency_dot.jsonl").exists());
    assert!(d.join("saliency_dot_gold.txt").exists());

    ok(d, &["explain", "--vocab-limit", "50"]);
    let report = Report::parse(&fs::read_to_string(d.join("report.txt")).unwrap()).unwrap();
    for section in ["model", "explanation", "fidelity", "complexity"] {
        assert!(report.sections.iter().any(|(n, _)| n == section), "{section}");
    }
    assert_eq!(report.get("explanation", "rule_file"), Some("rules.txt"));
    assert!(report.header.iter().any(|h| h.starts_with("parent model.unrv sha256:")));

    let summary = ok(d, &["eval", "--split", "test"]);
    let test_fidelity = report.get("fidelity", "test").unwrap();
    assert!(summary.ends_with(&format!("fidelity={test_fidelity}\n")), "{summary}");
    let valid = ok(d, &["eval", "--split", "valid"]);
    assert!(valid.ends_with(&format!("fidelity={}\n", report.get("fidelity", "valid").unwrap())));

    ok(d, &["baseline"]);
    let baseline = Report::parse(&fs::read_to_string(d.join("baseline_report.txt")).unwrap()).unwrap();
    assert_eq!(
        baseline.get("explanation", "columns"),
        report.get("explanation", "columns"),
        "baseline matches the gradient-informed vocabulary size"
    );
    let summary = ok(
        d,
        &[
            "eval",
            "--rules",
            d.join("baseline_rules.txt").to_str().unwrap(),
            "--features",
            d.join("baseline_features_test.tsv").to_str().unwrap(),
        ],
    );
    assert!(summary.ends_with(&format!("fidelity={}\n", baseline.get("fidelity", "test").unwrap())));

    let corpus = fs::read_to_string(d.join("corpus.jsonl")).unwrap();
    let id = corpus
        .lines()
        .find(|l| l.contains("\"septic\""))
        .and_then(|l| l.split('"').nth(3))
        .unwrap()
        .to_owned();
    ok(d, &["heatmap", "--doc", &id]);
    let html = fs::read_to_string(d.join(format!("heatmap_{id}.xhtml"))).unwrap();
    assert!(html.starts_with("<?xml"));
    assert!(html.contains("command heatmap"));
}

#[test]
fn zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    ok(d, &["train", "--epochs", "0", "--seed", "7"]);
    let checkpoint = read_checkpoint(fs::File::open(d.join("model.unrv")).unwrap()).unwrap();
    let dims = Dims {
        vocab: checkpoint.vocab.len(),
        embed: 100,
        hidden: 50,
        classes: 2,
    };
    assert_eq!(checkpoint.model, LstmModel::new(dims, 7));
    assert!(checkpoint.provenance.contains("parent corpus.jsonl sha256:"));
}

#[test]
fn synth_is_byte_identical_across_directories() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth_small(a.path());
    synth_small(b.path());
    for name in ["corpus.jsonl", "corpus_meta.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn missing_artifact_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(dir.path(), &["train"], 4);
    assert!(err.contains("kind=missing_artifact"));
    assert!(err.contains("corpus.jsonl"));
    let err = fails(dir.path(), &["eval"], 4);
    assert!(err.contains("rules.txt"));
}

#[test]
fn corrupt_corpus_exits_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path());
    let path = dir.path().join("corpus.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{\"id\": \"broken\"\n");
    let line = text.lines().count();
    fs::write(&path, text).unwrap();
    let err = fails(dir.path(), &["train"], 3);
    assert!(err.contains(&format!("line={line}")), "{err}");
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"").unwrap();
    let mut args = vec!["synth"];
    args.extend_from_slice(SMALL);
    let err = fails(&blocker.join("sub"), &args, 2);
    assert!(err.contains("kind=unwritable"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_small(d);
    let config = d.join("run.conf");
    fs::write(&config, "# model size\nhidden = 64\nepochs = 0\n").unwrap();
    let config = config.to_str().unwrap();
    let err = fails(d, &["train", "--config", config], 1);
    assert!(err.contains("kind=usage") && err.contains("hidden"), "{err}");
    ok(d, &["train", "--config", config, "--hidden", "50"]);
    let report = fs::read_to_string(d.join("train_report.txt")).unwrap();
    assert!(report.contains("epochs_run = 0"), "{report}");
}

#[test]
fn invalid_arguments_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    fails(dir.path(), &["train", "--hidden", "64"], 1);
    fails(dir.path(), &["saliency", "--pool", "max"], 1);
    fails(dir.path(), &["frobnicate"], 1);
    let help = unravel(dir.path(), &["--help"]);
    assert!(help.status.success());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(a.path(), "1"), (b.path(), "3")] {
        synth_small(dir);
        ok(dir, &["train", "--embed", "50", "--epochs", "1", "--threads", threads]);
    }
    assert_eq!(
        fs::read(a.path().join("model.unrv")).unwrap(),
        fs::read(b.path().join("model.unrv")).unwrap()
    );
}
