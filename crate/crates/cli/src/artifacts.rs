//! Artifact names, provenance headers and checked file access.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use unravel_core::corpus::{read_corpus, write_corpus, Corpus, CorpusReadError};
use unravel_core::rnn::{read_checkpoint, Checkpoint};
use unravel_core::{Pooling, Split};

use crate::error::{CliError, CliResult};

pub const CORPUS: &str = "corpus.jsonl";
pub const CORPUS_META: &str = "corpus_meta.txt";
pub const MODEL: &str = "model.unrv";
pub const TRAIN_METRICS: &str = "train_metrics.tsv";
pub const TRAIN_REPORT: &str = "train_report.txt";
pub const SKIPGRAM_VOCAB: &str = "skipgram_vocab.tsv";
pub const RULES: &str = "rules.txt";
pub const REPORT: &str = "report.txt";
pub const BASELINE_RULES: &str = "baseline_rules.txt";
pub const BASELINE_REPORT: &str = "baseline_report.txt";

pub fn saliency_dump(pool: Pooling) -> String {
    format!("saliency_{pool}.jsonl")
}

pub fn saliency_gold_report(pool: Pooling) -> String {
    format!("saliency_{pool}_gold.txt")
}

pub fn features(split: Split) -> String {
    format!("features_{split}.tsv")
}

pub fn baseline_features(split: Split) -> String {
    format!("baseline_features_{split}.tsv")
}

pub fn eval_report(split: Split) -> String {
    format!("eval_{split}.txt")
}

pub fn heatmap(doc_id: &str) -> String {
    format!("heatmap_{doc_id}.xhtml")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Header lines identifying the producing command, its seed and the exact
/// inputs it read. Parent artifacts are named by file name only so that runs
/// in different directories produce identical bytes.
pub fn provenance(command: &str, seed: u64, parents: &[&Path]) -> CliResult<Vec<String>> {
    let mut lines = vec![
        format!("unravel {}", env!("CARGO_PKG_VERSION")),
        format!("command {command}"),
        format!("seed {seed}"),
    ];
    for path in parents {
        let bytes = fs::read(path).map_err(|e| CliError::reading(path, e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        lines.push(format!("parent {name} sha256:{}", sha256_hex(&bytes)));
    }
    Ok(lines)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::unwritable(dir, e))
}

/// Creates `path` and hands a buffered writer to `fill`. Any I/O failure is
/// reported as an unwritable artifact.
pub fn write_artifact<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
{
    let file = File::create(path).map_err(|e| CliError::unwritable(path, e))?;
    let mut out = BufWriter::new(file);
    fill(&mut out).map_err(|e| CliError::unwritable(path, e))?;
    out.flush().map_err(|e| CliError::unwritable(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_artifact(path, |out| Ok(out.write_all(text.as_bytes())?))
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::reading(path, e))
}

pub fn write_corpus_file(path: &Path, corpus: &Corpus, provenance: &[String]) -> CliResult<()> {
    write_artifact(path, |out| {
        for line in provenance {
            writeln!(out, "# {line}")?;
        }
        Ok(write_corpus(&mut *out, &corpus.documents)?)
    })
}

pub fn load_corpus(path: &Path, seed: u64) -> CliResult<Corpus> {
    let documents = read_corpus(open(path)?).map_err(|e| match e {
        CorpusReadError::Corrupt { line, message } => CliError::CorruptCorpus {
            path: path.to_owned(),
            line,
            message,
        },
        CorpusReadError::Io(e) => CliError::in_file(path, e),
    })?;
    Ok(Corpus::from_documents(documents, seed))
}

pub fn load_model(path: &Path) -> CliResult<Checkpoint> {
    read_checkpoint(open(path)?).map_err(|e| CliError::in_file(path, e))
}

/// Resolves artifact file names against the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}
