use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use super::{discretize, enumerate_skipgrams, quote_key, unquote_key, Level, ScoredSkipgram, SkipgramVocab, Thresholds};
use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRow {
    pub doc_id: String,
    /// The model's predicted class for the document.
    pub label: Label,
    pub levels: Vec<Level>,
}

/// Documents × skipgram keys, one level per cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureTable {
    pub keys: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }
}

/// Levels of one document's skipgrams over the vocabulary columns. Keys that
/// do not occur are [`Level::Zero`].
pub fn document_features(
    scored: &[ScoredSkipgram],
    index: &HashMap<&str, usize>,
    columns: usize,
    thresholds: &Thresholds,
) -> Vec<Level> {
    let mut levels = vec![Level::Zero; columns];
    for s in scored {
        if let Some(&col) = index.get(s.key.as_str()) {
            levels[col] = discretize(Some(s.score), thresholds);
        }
    }
    levels
}

/// Builds a table from `(doc_id, predicted label, scored skipgrams)` rows.
pub fn build_feature_table<I>(vocab: &SkipgramVocab, documents: I) -> FeatureTable
where
    I: IntoIterator<Item = (String, Label, Vec<ScoredSkipgram>)>,
{
    let index = vocab.index();
    let rows = documents
        .into_iter()
        .map(|(doc_id, label, scored)| FeatureRow {
            doc_id,
            label,
            levels: document_features(&scored, &index, vocab.len(), &vocab.thresholds),
        })
        .collect();
    FeatureTable {
        keys: vocab.keys.clone(),
        rows,
    }
}

/// Distinct skipgram keys of a token sequence.
pub fn skipgram_keys<S: AsRef<str>>(tokens: &[S]) -> HashSet<String> {
    enumerate_skipgrams(tokens.len())
        .into_iter()
        .map(|s| s.key(tokens))
        .collect()
}

/// The `limit` keys contained in the most documents; ties by key.
pub fn frequent_keys<'a, I>(documents: I, limit: usize) -> Vec<String>
where
    I: IntoIterator<Item = &'a HashSet<String>>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for keys in documents {
        for k in keys {
            *counts.entry(k.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(limit).map(|(k, _)| k.to_owned()).collect()
}

/// Presence table: a key present in the document is [`Level::PlusPlus`],
/// absent is [`Level::Zero`].
pub fn binary_presence_table<'a, I>(keys: &[String], documents: I) -> FeatureTable
where
    I: IntoIterator<Item = (String, Label, &'a HashSet<String>)>,
{
    let rows = documents
        .into_iter()
        .map(|(doc_id, label, present)| FeatureRow {
            doc_id,
            label,
            levels: keys
                .iter()
                .map(|k| if present.contains(k) { Level::PlusPlus } else { Level::Zero })
                .collect(),
        })
        .collect();
    FeatureTable {
        keys: keys.to_vec(),
        rows,
    }
}

fn write_provenance<W: Write>(out: &mut W, provenance: &[String]) -> Result<()> {
    for line in provenance {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Tab-separated table: `#` provenance lines, a header `doc_id, label,
/// quoted keys...`, then one row per document.
pub fn write_feature_table<W: Write>(mut out: W, table: &FeatureTable, provenance: &[String]) -> Result<()> {
    write_provenance(&mut out, provenance)?;
    let mut header = String::from("doc_id\tlabel");
    for k in &table.keys {
        header.push('\t');
        header.push_str(&quote_key(k));
    }
    writeln!(out, "{header}")?;
    for row in &table.rows {
        let mut line = format!("{}\t{}", row.doc_id, row.label);
        for l in &row.levels {
            line.push('\t');
            line.push_str(l.symbol());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.starts_with('#') || l.is_empty()))
}

pub fn read_feature_table<R: BufRead>(input: R) -> Result<FeatureTable> {
    let mut lines = content_lines(input);
    let (line_no, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
    let mut fields = header.split('\t');
    if fields.next() != Some("doc_id") || fields.next() != Some("label") {
        return Err(Error::parse(line_no, "header must start with doc_id and label"));
    }
    let keys = fields
        .map(|f| match unquote_key(f) {
            Ok((k, "")) => Ok(k),
            Ok(_) => Err(Error::parse(line_no, format!("trailing text after key {f}"))),
            Err(e) => Err(Error::parse(line_no, e)),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for line in lines {
        let (line_no, line) = line?;
        let mut fields = line.split('\t');
        let doc_id = fields.next().unwrap_or_default().to_owned();
        let label = fields
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing label"))?
            .parse::<Label>()
            .map_err(|e| Error::parse(line_no, e))?;
        let levels = fields
            .map(|f| f.parse::<Level>().map_err(|e| Error::parse(line_no, e)))
            .collect::<Result<Vec<_>>>()?;
        if levels.len() != keys.len() {
            return Err(Error::parse(
                line_no,
                format!("{} levels for {} columns", levels.len(), keys.len()),
            ));
        }
        rows.push(FeatureRow { doc_id, label, levels });
    }
    Ok(FeatureTable { keys, rows })
}

/// Vocabulary sidecar: provenance, both thresholds, then `quoted key \t
/// weight` lines in vocabulary order.
pub fn write_vocab<W: Write>(mut out: W, vocab: &SkipgramVocab, provenance: &[String]) -> Result<()> {
    write_provenance(&mut out, provenance)?;
    writeln!(out, "threshold_negative\t{}", vocab.thresholds.negative)?;
    writeln!(out, "threshold_positive\t{}", vocab.thresholds.positive)?;
    for (k, w) in vocab.keys.iter().zip(&vocab.weights) {
        writeln!(out, "{}\t{}", quote_key(k), w)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_vocab<R: BufRead>(input: R) -> Result<SkipgramVocab> {
    let mut lines = content_lines(input);
    let mut threshold = |name: &str| -> Result<f64> {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing {name}")))??;
        line.strip_prefix(name)
            .and_then(|v| v.strip_prefix('\t'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(line_no, format!("expected {name}")))
    };
    let thresholds = Thresholds {
        negative: threshold("threshold_negative")?,
        positive: threshold("threshold_positive")?,
    };
    let mut keys = Vec::new();
    let mut weights = Vec::new();
    let mut seen = BTreeSet::new();
    for line in lines {
        let (line_no, line) = line?;
        let (key, rest) = unquote_key(&line).map_err(|e| Error::parse(line_no, e))?;
        let weight = rest
            .strip_prefix('\t')
            .and_then(|w| w.parse::<f64>().ok())
            .ok_or_else(|| Error::parse(line_no, "expected a weight after the key"))?;
        if !seen.insert(key.clone()) {
            return Err(Error::parse(line_no, format!("duplicate key {}", quote_key(&key))));
        }
        keys.push(key);
        weights.push(weight);
    }
    Ok(SkipgramVocab {
        keys,
        weights,
        thresholds,
    })
}
