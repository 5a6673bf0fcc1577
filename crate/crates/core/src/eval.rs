//! Explanation fidelity and the train/validate/test protocol.
//!
//! Both explanation methods fit their features and decision list on the
//! training split, choose induction parameters on the validation split and
//! only then score the test split. Row labels are always the classifier's
//! predictions, never the gold labels.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::corpus::{Corpus, Document, Label, Split};
use crate::error::{Error, Result};
use crate::rnn::{LstmModel, Vocab};
use crate::rules::{tune_params, DecisionList, InductionParams, Tuned};
use crate::saliency::{saliency_maps, Pooling, SaliencyMap};
use crate::skipgram::{
    binary_presence_table, build_feature_table, fit_vocab, frequent_keys, score_skipgrams,
    skipgram_keys, FeatureTable, ScoredSkipgram, SkipgramVocab, DEFAULT_TOP_PER_DOC,
    DEFAULT_VOCAB_LIMIT,
};

/// 2 × 2 counts indexed `[reference][predicted]`.
pub type Confusion = [[usize; 2]; 2];

pub fn confusion(reference: &[Label], predicted: &[Label]) -> Confusion {
    assert_eq!(reference.len(), predicted.len());
    let mut m = [[0; 2]; 2];
    for (r, p) in reference.iter().zip(predicted) {
        m[r.index()][p.index()] += 1;
    }
    m
}

/// Unweighted mean of the per-class F1 scores. A class that appears in
/// neither the reference nor the prediction scores 1.
pub fn macro_f1(reference: &[Label], predicted: &[Label]) -> f64 {
    let m = confusion(reference, predicted);
    let per_class = |c: usize| {
        let tp = m[c][c] as f64;
        let fp = m[1 - c][c] as f64;
        let fn_ = m[c][1 - c] as f64;
        if tp + fp + fn_ == 0.0 {
            1.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        }
    };
    (per_class(0) + per_class(1)) / 2.0
}

pub fn fidelity(list: &DecisionList, table: &FeatureTable) -> Result<f64> {
    Ok(macro_f1(&table.labels(), &list.predict(table)?))
}

/// Number of rules, excluding the default.
pub fn complexity(list: &DecisionList) -> usize {
    list.complexity()
}

/// Classifier output for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedDocument {
    pub doc_id: String,
    pub split: Split,
    pub gold_label: Label,
    pub prediction: Label,
    pub tokens: Vec<String>,
}

/// Classifier output and word saliency for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentAnalysis {
    pub document: PredictedDocument,
    pub saliency: SaliencyMap,
}

fn predicted(doc: &Document, class: usize) -> PredictedDocument {
    PredictedDocument {
        doc_id: doc.id.clone(),
        split: doc.split,
        gold_label: doc.label,
        prediction: Label::from_index(class).expect("two classes"),
        tokens: doc.tokens().map(str::to_owned).collect(),
    }
}

/// Runs the classifier over every document and pools its input gradients.
pub fn analyze_corpus(
    model: &LstmModel,
    vocab: &Vocab,
    corpus: &Corpus,
    pooling: Pooling,
) -> Result<Vec<DocumentAnalysis>> {
    let net = model.compile();
    corpus
        .documents
        .par_iter()
        .map(|doc| {
            let seq = vocab.encode(doc);
            let saliency = saliency_maps(&net, &doc.id, &seq, &[pooling])?.remove(0);
            Ok(DocumentAnalysis {
                document: predicted(doc, saliency.target_class),
                saliency,
            })
        })
        .collect()
}

/// Runs the classifier over every document, in corpus order.
pub fn predict_corpus(model: &LstmModel, vocab: &Vocab, corpus: &Corpus) -> Result<Vec<PredictedDocument>> {
    let net = model.compile();
    corpus
        .documents
        .par_iter()
        .map(|doc| Ok(predicted(doc, net.forward(&vocab.encode(doc))?.predicted_class())))
        .collect()
}

/// Share of documents in `split` whose prediction matches the gold label.
pub fn split_accuracy(docs: &[PredictedDocument], split: Split) -> f64 {
    let (hits, total) = docs
        .iter()
        .filter(|d| d.split == split)
        .fold((0usize, 0usize), |(h, t), d| (h + usize::from(d.prediction == d.gold_label), t + 1));
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    pub top_per_doc: usize,
    pub vocab_limit: usize,
    pub grid: Vec<InductionParams>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            top_per_doc: DEFAULT_TOP_PER_DOC,
            vocab_limit: DEFAULT_VOCAB_LIMIT,
            grid: crate::rules::default_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScores {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub fidelity: SplitScores,
    pub complexity: usize,
    /// Test rows matched by each rule, then by the default.
    pub test_coverage: Vec<usize>,
    /// Classifier prediction vs. list output on the test split.
    pub test_confusion: Confusion,
}

/// A fitted explanation and the tables it was fitted and scored on.
#[derive(Debug, Clone)]
pub struct Explanation {
    /// Present for gradient-informed explanations; the baseline has no
    /// importance scores.
    pub vocab: Option<SkipgramVocab>,
    pub train: FeatureTable,
    pub valid: FeatureTable,
    pub test: FeatureTable,
    pub tuned: Tuned,
    pub report: FidelityReport,
}

impl Explanation {
    pub fn list(&self) -> &DecisionList {
        &self.tuned.list
    }
}

fn scored(doc: &DocumentAnalysis) -> Result<Vec<ScoredSkipgram>> {
    score_skipgrams(&doc.document.tokens, &doc.saliency.scores)
}

fn of_split(docs: &[DocumentAnalysis], split: Split) -> Vec<&DocumentAnalysis> {
    docs.iter().filter(|d| d.document.split == split).collect()
}

fn check_isolation<'a>(fitted: impl IntoIterator<Item = &'a str>, test: &FeatureTable) -> Result<()> {
    let test_ids: HashSet<&str> = test.rows.iter().map(|r| r.doc_id.as_str()).collect();
    if let Some(id) = fitted.into_iter().find(|id| test_ids.contains(id)) {
        return Err(Error::SplitLeakage(format!("test document {id} was used for fitting")));
    }
    Ok(())
}

fn score(tuned: Tuned, vocab: Option<SkipgramVocab>, train: FeatureTable, valid: FeatureTable, test: FeatureTable) -> Result<Explanation> {
    let list = &tuned.list;
    let compiled = list.compile(&test.keys)?;
    let mut test_coverage = vec![0; list.rules.len() + 1];
    let mut test_predicted = Vec::with_capacity(test.len());
    for row in &test.rows {
        let hit = compiled.first_match(&row.levels);
        test_coverage[hit.unwrap_or(list.rules.len())] += 1;
        test_predicted.push(compiled.classify(&row.levels));
    }
    let report = FidelityReport {
        fidelity: SplitScores {
            train: fidelity(list, &train)?,
            valid: tuned.valid_f1,
            test: macro_f1(&test.labels(), &test_predicted),
        },
        complexity: complexity(list),
        test_coverage,
        test_confusion: confusion(&test.labels(), &test_predicted),
    };
    Ok(Explanation {
        vocab,
        train,
        valid,
        test,
        tuned,
        report,
    })
}

/// Gradient-informed explanation: skipgram importance vocabulary and
/// thresholds from the training split, parameters tuned on validation, test
/// scored last.
pub fn explain(docs: &[DocumentAnalysis], config: &ExplainConfig) -> Result<Explanation> {
    let train_docs = of_split(docs, Split::Train);
    if train_docs.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let table_for = |split_docs: &[&DocumentAnalysis], vocab: &SkipgramVocab| -> Result<FeatureTable> {
        let rows = split_docs
            .par_iter()
            .map(|d| Ok((d.document.doc_id.clone(), d.document.prediction, scored(d)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(build_feature_table(vocab, rows))
    };

    let train_scored = train_docs.par_iter().map(|d| scored(d)).collect::<Result<Vec<_>>>()?;
    let vocab = fit_vocab(train_scored, config.top_per_doc, config.vocab_limit)?;
    let train = table_for(&train_docs, &vocab)?;
    let valid = table_for(&of_split(docs, Split::Valid), &vocab)?;
    let tuned = tune_params(&train, &valid, &config.grid)?;

    let test = table_for(&of_split(docs, Split::Test), &vocab)?;
    check_isolation(train_docs.iter().map(|d| d.document.doc_id.as_str()), &test)?;
    check_isolation(valid.rows.iter().map(|r| r.doc_id.as_str()), &test)?;
    score(tuned, Some(vocab), train, valid, test)
}

/// Gradient-free baseline: presence of the `vocab_limit` skipgrams found in
/// the most training documents, with the same inducer and protocol.
pub fn explain_baseline(docs: &[PredictedDocument], vocab_limit: usize, grid: &[InductionParams]) -> Result<Explanation> {
    let key_sets: Vec<HashSet<String>> = docs.par_iter().map(|d| skipgram_keys(&d.tokens)).collect();
    let in_split = |split: Split| docs.iter().zip(&key_sets).filter(move |(d, _)| d.split == split);
    if in_split(Split::Train).next().is_none() {
        return Err(Error::EmptyTrainingSplit);
    }
    let keys = frequent_keys(in_split(Split::Train).map(|(_, k)| k), vocab_limit);
    let table = |split: Split| {
        binary_presence_table(
            &keys,
            in_split(split).map(|(d, k)| (d.doc_id.clone(), d.prediction, k)),
        )
    };
    let train = table(Split::Train);
    let valid = table(Split::Valid);
    let tuned = tune_params(&train, &valid, grid)?;
    let test = table(Split::Test);
    check_isolation(train.rows.iter().map(|r| r.doc_id.as_str()), &test)?;
    score(tuned, None, train, valid, test)
}

/// Structured key-value report with named sections, printed in insertion
/// order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl Report {
    pub fn section(&mut self, name: &str) -> &mut Vec<(String, String)> {
        if let Some(i) = self.sections.iter().position(|(n, _)| n == name) {
            return &mut self.sections[i].1;
        }
        self.sections.push((name.to_owned(), Vec::new()));
        &mut self.sections.last_mut().expect("just pushed").1
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl fmt::Display) {
        let entries = self.section(section);
        let value = value.to_string();
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => entries.push((key.to_owned(), value)),
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(n, _)| n == section)?
            .1
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parses the text form written by `Display`; `#` lines become the
    /// header.
    pub fn parse(text: &str) -> Result<Report> {
        let mut report = Report::default();
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix("# ") {
                report.header.push(h.to_owned());
            } else if line.trim().is_empty() {
                continue;
            } else if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                report.section(name);
                current = Some(name.to_owned());
            } else {
                let section = current
                    .as_deref()
                    .ok_or_else(|| Error::parse(i + 1, "entry before any section"))?;
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| Error::parse(i + 1, "expected 'key = value'"))?;
                report.set(section, k, v);
            }
        }
        Ok(report)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.header {
            writeln!(f, "# {h}")?;
        }
        for (i, (name, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{name}]")?;
            for (k, v) in entries {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

/// Formats a score for reports.
pub fn fmt_score(v: f64) -> String {
    format!("{v:.6}")
}

/// Fills the `[explanation]`, `[fidelity]` and `[complexity]` sections.
pub fn describe(report: &mut Report, method: &str, explanation: &Explanation) {
    let r = &explanation.report;
    let params = explanation.tuned.params;
    report.set("explanation", "method", method);
    report.set("explanation", "columns", explanation.train.keys.len());
    if let Some(v) = &explanation.vocab {
        report.set("explanation", "threshold_negative", v.thresholds.negative);
        report.set("explanation", "threshold_positive", v.thresholds.positive);
    }
    report.set("explanation", "confidence", params.confidence);
    report.set("explanation", "min_instances", params.min_instances);
    report.set("fidelity", "train", fmt_score(r.fidelity.train));
    report.set("fidelity", "valid", fmt_score(r.fidelity.valid));
    report.set("fidelity", "test", fmt_score(r.fidelity.test));
    let c = r.test_confusion;
    report.set(
        "fidelity",
        "test_confusion",
        format!("{} {} {} {}", c[0][0], c[0][1], c[1][0], c[1][1]),
    );
    report.set("complexity", "rules", r.complexity);
    report.set(
        "complexity",
        "test_coverage",
        r.test_coverage.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{NonSeptic as N, Septic as S};

    #[test]
    fn identical_outputs_score_one() {
        assert_eq!(macro_f1(&[S, N, S], &[S, N, S]), 1.0);
    }

    #[test]
    fn constant_prediction_on_balanced_split() {
        // F1 for the predicted class is 2/3, the other class gets 0
        let reference = [S, S, N, N];
        let f1 = macro_f1(&reference, &[S; 4]);
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_counts_as_perfect() {
        assert_eq!(macro_f1(&[S, S], &[S, S]), 1.0);
        assert_eq!(macro_f1(&[], &[]), 1.0);
    }

    #[test]
    fn confusion_layout() {
        let m = confusion(&[S, S, N], &[S, N, N]);
        assert_eq!(m, [[1, 0], [1, 1]]);
    }

    #[test]
    fn report_round_trip() {
        let mut r = Report {
            header: vec!["seed 7".into()],
            ..Report::default()
        };
        r.set("model", "checkpoint", "model.unrv");
        r.set("fidelity", "test", fmt_score(0.5));
        r.set("model", "accuracy", 0.9);
        let text = r.to_string();
        assert_eq!(
            text,
            "# seed 7\n[model]\ncheckpoint = model.unrv\naccuracy = 0.9\n\n[fidelity]\ntest = 0.500000\n"
        );
        assert_eq!(Report::parse(&text).unwrap(), r);
        assert_eq!(r.get("fidelity", "test"), Some("0.500000"));
    }
}
