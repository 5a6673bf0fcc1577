//! One function per subcommand. Each reads its inputs from the output
//! directory, writes its artifacts there and returns a short summary for
//! standard output.

use std::io::Write;
use std::path::{Path, PathBuf};

use unravel_core::corpus::{generate_corpus, CorpusConfig};
use unravel_core::eval::{
    analyze_corpus, describe, explain, explain_baseline, fidelity, fmt_score, predict_corpus,
    split_accuracy, ExplainConfig, Explanation, Report,
};
use unravel_core::rnn::{train_classifier, write_checkpoint, Checkpoint, TrainConfig};
use unravel_core::rules::{read_rules, write_rules};
use unravel_core::saliency::{mean_topk_gold_accuracy, render_heatmap, saliency_maps, write_saliency_dump};
use unravel_core::skipgram::{read_feature_table, read_vocab, write_feature_table, write_vocab, FeatureTable};
use unravel_core::Split;

use crate::artifacts::{self as art, Layout};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const SPLITS: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

struct Ctx<'a> {
    config: &'a RunConfig,
    layout: Layout,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.layout.path(name)
    }

    fn provenance(&self, command: &str, parents: &[&Path]) -> CliResult<Vec<String>> {
        art::provenance(command, self.config.seed, parents)
    }
}

fn context(config: &RunConfig) -> CliResult<Ctx<'_>> {
    art::ensure_dir(&config.out_dir)?;
    Ok(Ctx {
        config,
        layout: Layout {
            dir: config.out_dir.clone(),
        },
    })
}

pub fn synth(config: &RunConfig) -> CliResult<String> {
    let ctx = context(config)?;
    let (corpus, stats) = generate_corpus(&CorpusConfig {
        seed: config.seed,
        keyword_docs: config.keyword_docs,
        distractor_docs: config.distractor_docs,
        ..CorpusConfig::default()
    })?;
    let header = ctx.provenance("synth", &[])?;
    art::write_corpus_file(&ctx.path(art::CORPUS), &corpus, &header)?;

    let mut meta = Report {
        header,
        ..Report::default()
    };
    meta.set("corpus", "file", art::CORPUS);
    meta.set("corpus", "keyword_docs", config.keyword_docs);
    meta.set("corpus", "distractor_docs", config.distractor_docs);
    meta.set("corpus", "documents", stats.documents);
    meta.set("corpus", "septic_fraction", fmt_score(stats.septic_fraction));
    meta.set("corpus", "label_noise_fraction", fmt_score(stats.label_noise_fraction));
    meta.set("splits", "train", stats.train);
    meta.set("splits", "valid", stats.valid);
    meta.set("splits", "test", stats.test);
    art::write_text(&ctx.path(art::CORPUS_META), &meta.to_string())?;
    Ok(format!(
        "documents={} septic_fraction={} label_noise_fraction={}",
        stats.documents,
        fmt_score(stats.septic_fraction),
        fmt_score(stats.label_noise_fraction)
    ))
}

pub fn train(config: &RunConfig) -> CliResult<String> {
    let ctx = context(config)?;
    let corpus_path = ctx.path(art::CORPUS);
    let corpus = art::load_corpus(&corpus_path, config.seed)?;
    let train_config = TrainConfig {
        embed_dim: config.embed,
        hidden_dim: config.hidden,
        max_epochs: config.epochs,
        seed: config.seed,
        ..TrainConfig::default()
    };
    let (vocab, outcome) = train_classifier(&corpus, &train_config)?;
    let header = ctx.provenance("train", &[&corpus_path])?;

    let model_path = ctx.path(art::MODEL);
    let checkpoint = Checkpoint {
        model: outcome.model,
        vocab,
        provenance: header.join("\n"),
    };
    art::write_artifact(&model_path, |out| Ok(write_checkpoint(out, &checkpoint)?))?;

    art::write_artifact(&ctx.path(art::TRAIN_METRICS), |out| {
        for line in &header {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "epoch\ttrain_loss\ttrain_accuracy\tvalid_accuracy")?;
        for m in &outcome.metrics {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}",
                m.epoch, m.train_loss, m.train_accuracy, m.valid_accuracy
            )?;
        }
        Ok(())
    })?;

    let predictions = predict_corpus(&checkpoint.model, &checkpoint.vocab, &corpus)?;
    let test_accuracy = split_accuracy(&predictions, Split::Test);
    let valid_accuracy = split_accuracy(&predictions, Split::Valid);
    let mut report = Report {
        header,
        ..Report::default()
    };
    report.set("model", "checkpoint", art::MODEL);
    report.set("model", "hidden", config.hidden);
    report.set("model", "embed", config.embed);
    report.set("model", "vocab", checkpoint.vocab.len());
    report.set("model", "epochs_run", outcome.metrics.len());
    report.set("model", "best_epoch", outcome.best_epoch);
    report.set("model", "valid_accuracy", fmt_score(valid_accuracy));
    report.set("model", "test_accuracy", fmt_score(test_accuracy));
    art::write_text(&ctx.path(art::TRAIN_REPORT), &report.to_string())?;
    Ok(format!(
        "epochs_run={} best_epoch={} valid_accuracy={} test_accuracy={}",
        outcome.metrics.len(),
        outcome.best_epoch,
        fmt_score(valid_accuracy),
        fmt_score(test_accuracy)
    ))
}

pub fn saliency(config: &RunConfig, eval_gold: bool) -> CliResult<String> {
    let ctx = context(config)?;
    let (corpus_path, model_path) = (ctx.path(art::CORPUS), ctx.path(art::MODEL));
    let corpus = art::load_corpus(&corpus_path, config.seed)?;
    let checkpoint = art::load_model(&model_path)?;
    let analyses = analyze_corpus(&checkpoint.model, &checkpoint.vocab, &corpus, config.pool)?;
    let maps: Vec<_> = analyses.iter().map(|a| a.saliency.clone()).collect();
    let header = ctx.provenance("saliency", &[&corpus_path, &model_path])?;
    art::write_artifact(&ctx.path(&art::saliency_dump(config.pool)), |out| {
        for line in &header {
            writeln!(out, "# {line}")?;
        }
        Ok(write_saliency_dump(&mut *out, &maps)?)
    })?;
    let mut summary = format!("pool={} documents={}", config.pool, maps.len());
    if eval_gold {
        let pairs = corpus
            .documents
            .iter()
            .zip(&maps)
            .filter(|(d, _)| d.split == Split::Test)
            .map(|(d, m)| (m, d));
        let (mean, count) = mean_topk_gold_accuracy(pairs)?;
        let mut report = Report {
            header,
            ..Report::default()
        };
        report.set("saliency", "pool", config.pool);
        report.set("saliency", "split", Split::Test);
        report.set("saliency", "documents", count);
        report.set("saliency", "mean_topk_gold_accuracy", fmt_score(mean));
        art::write_text(&ctx.path(&art::saliency_gold_report(config.pool)), &report.to_string())?;
        summary.push_str(&format!(" gold_documents={count} mean_topk_gold_accuracy={}", fmt_score(mean)));
    }
    Ok(summary)
}

fn write_tables(ctx: &Ctx, e: &Explanation, name: fn(Split) -> String, header: &[String]) -> CliResult<()> {
    for (split, table) in SPLITS.iter().zip([&e.train, &e.valid, &e.test]) {
        art::write_artifact(&ctx.path(&name(*split)), |out| {
            Ok(write_feature_table(out, table, header)?)
        })?;
    }
    Ok(())
}

fn model_section(report: &mut Report, test_accuracy: f64) {
    report.set("model", "checkpoint", art::MODEL);
    report.set("model", "test_accuracy", fmt_score(test_accuracy));
}

pub fn explain_cmd(config: &RunConfig) -> CliResult<String> {
    let ctx = context(config)?;
    let (corpus_path, model_path) = (ctx.path(art::CORPUS), ctx.path(art::MODEL));
    let corpus = art::load_corpus(&corpus_path, config.seed)?;
    let checkpoint = art::load_model(&model_path)?;
    let analyses = analyze_corpus(&checkpoint.model, &checkpoint.vocab, &corpus, config.pool)?;
    let explanation = explain(
        &analyses,
        &ExplainConfig {
            top_per_doc: config.top_per_doc,
            vocab_limit: config.vocab_limit,
            grid: config.grid.clone(),
        },
    )?;
    let header = ctx.provenance("explain", &[&corpus_path, &model_path])?;
    let vocab = explanation.vocab.as_ref().expect("gradient-informed explanation has a vocabulary");
    art::write_artifact(&ctx.path(art::SKIPGRAM_VOCAB), |out| Ok(write_vocab(out, vocab, &header)?))?;
    write_tables(&ctx, &explanation, art::features, &header)?;
    art::write_artifact(&ctx.path(art::RULES), |out| {
        Ok(write_rules(out, explanation.list(), &header)?)
    })?;

    let predictions: Vec<_> = analyses.iter().map(|a| a.document.clone()).collect();
    let mut report = Report {
        header,
        ..Report::default()
    };
    model_section(&mut report, split_accuracy(&predictions, Split::Test));
    report.set("explanation", "rule_file", art::RULES);
    report.set("explanation", "pooling", config.pool);
    report.set("explanation", "top_per_doc", config.top_per_doc);
    report.set("explanation", "vocab_limit", config.vocab_limit);
    describe(&mut report, "unravel", &explanation);
    art::write_text(&ctx.path(art::REPORT), &report.to_string())?;
    Ok(summary(&explanation))
}

fn summary(e: &Explanation) -> String {
    let f = e.report.fidelity;
    format!(
        "rules={} fidelity_train={} fidelity_valid={} fidelity_test={}",
        e.report.complexity,
        fmt_score(f.train),
        fmt_score(f.valid),
        fmt_score(f.test)
    )
}

/// The baseline uses as many columns as the gradient-informed vocabulary
/// when one exists, unless a limit was given explicitly.
pub fn baseline(config: &RunConfig, explicit_limit: Option<usize>) -> CliResult<String> {
    let ctx = context(config)?;
    let (corpus_path, model_path) = (ctx.path(art::CORPUS), ctx.path(art::MODEL));
    let vocab_path = ctx.path(art::SKIPGRAM_VOCAB);
    let corpus = art::load_corpus(&corpus_path, config.seed)?;
    let checkpoint = art::load_model(&model_path)?;
    let limit = match explicit_limit {
        Some(l) => l,
        None if vocab_path.exists() => read_vocab(art::open(&vocab_path)?)
            .map_err(|e| CliError::in_file(&vocab_path, e))?
            .len(),
        None => config.vocab_limit,
    };
    let predictions = predict_corpus(&checkpoint.model, &checkpoint.vocab, &corpus)?;
    let explanation = explain_baseline(&predictions, limit, &config.grid)?;
    let header = ctx.provenance("baseline", &[&corpus_path, &model_path])?;
    write_tables(&ctx, &explanation, art::baseline_features, &header)?;
    art::write_artifact(&ctx.path(art::BASELINE_RULES), |out| {
        Ok(write_rules(out, explanation.list(), &header)?)
    })?;
    let mut report = Report {
        header,
        ..Report::default()
    };
    model_section(&mut report, split_accuracy(&predictions, Split::Test));
    report.set("explanation", "rule_file", art::BASELINE_RULES);
    report.set("explanation", "vocab_limit", limit);
    describe(&mut report, "baseline", &explanation);
    art::write_text(&ctx.path(art::BASELINE_REPORT), &report.to_string())?;
    Ok(summary(&explanation))
}

pub fn eval(
    config: &RunConfig,
    split: Split,
    rules: Option<PathBuf>,
    features: Option<PathBuf>,
) -> CliResult<String> {
    let ctx = context(config)?;
    let rules_path = rules.unwrap_or_else(|| ctx.path(art::RULES));
    let table_path = features.unwrap_or_else(|| ctx.path(&art::features(split)));
    let list = read_rules(art::open(&rules_path)?).map_err(|e| CliError::in_file(&rules_path, e))?;
    let table: FeatureTable =
        read_feature_table(art::open(&table_path)?).map_err(|e| CliError::in_file(&table_path, e))?;
    let score = fidelity(&list, &table)?;
    let mut report = Report {
        header: ctx.provenance("eval", &[&rules_path, &table_path])?,
        ..Report::default()
    };
    let file_name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    report.set("explanation", "rule_file", file_name(&rules_path));
    report.set("explanation", "feature_table", file_name(&table_path));
    report.set("fidelity", split.as_str(), fmt_score(score));
    report.set("complexity", "rules", list.complexity());
    art::write_text(&ctx.path(&art::eval_report(split)), &report.to_string())?;
    Ok(format!("split={split} rows={} fidelity={}", table.len(), fmt_score(score)))
}

pub fn heatmap(config: &RunConfig, doc_id: &str) -> CliResult<String> {
    let ctx = context(config)?;
    let (corpus_path, model_path) = (ctx.path(art::CORPUS), ctx.path(art::MODEL));
    let corpus = art::load_corpus(&corpus_path, config.seed)?;
    let checkpoint = art::load_model(&model_path)?;
    let doc = corpus
        .get(doc_id)
        .ok_or_else(|| CliError::Failed(format!("no document with id '{doc_id}'")))?;
    let net = checkpoint.model.compile();
    let map = saliency_maps(&net, &doc.id, &checkpoint.vocab.encode(doc), &[config.pool])?.remove(0);
    let header = ctx.provenance("heatmap", &[&corpus_path, &model_path])?;
    let html = render_heatmap(&map, doc, &header)?;
    let path = ctx.path(&art::heatmap(doc_id));
    art::write_text(&path, &html)?;
    Ok(format!("doc={doc_id} pool={} file={}", map.method, path.display()))
}
