//! Synthetic sepsis-classification corpus.
//!
//! Keyword documents hold one infection sentence, one sentence per
//! inflammatory-response criterion and ten distractor sentences; distractor
//! documents hold seventeen distractor sentences. Labels come from a fixed
//! rule over the keyword occurrences the negation detector does not flag.

mod io;
pub mod keywords;
pub mod negation;
pub mod templates;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::io::{read_corpus, write_corpus, CorpusReadError};
pub use self::keywords::{KeywordHit, KeywordKind, KeywordSets, Phrase};
pub use self::negation::{detect_negation, NegationAnnotation};
pub use self::templates::{
    build_sentence_pool, CarrierPool, CarrierTemplate, Polarity, SentencePool, TemplateGrammar,
};
use crate::error::{Error, Result};

pub const SENTENCES_PER_DOCUMENT: usize = 17;
pub const DISTRACTORS_PER_KEYWORD_DOCUMENT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonSeptic,
    Septic,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NonSeptic, Label::Septic];

    /// Output-node index of this class in the classifier.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonSeptic => "non_septic",
            Label::Septic => "septic",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "septic" => Ok(Label::Septic),
            "non_septic" => Ok(Label::NonSeptic),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// A (sentence index, token index) position.
pub type Position = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub label: Label,
    pub gold: BTreeSet<Position>,
    pub split: Split,
}

impl Document {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Converts a (sentence, token) position into an index into the
    /// concatenated token sequence.
    pub fn flat_index(&self, (sentence, token): Position) -> usize {
        self.sentences[..sentence]
            .iter()
            .map(Vec::len)
            .sum::<usize>()
            + token
    }

    /// Gold positions as indices into the concatenated token sequence.
    pub fn flat_gold(&self) -> BTreeSet<usize> {
        let mut offsets = Vec::with_capacity(self.sentences.len());
        let mut acc = 0;
        for s in &self.sentences {
            offsets.push(acc);
            acc += s.len();
        }
        self.gold.iter().map(|&(s, t)| offsets[s] + t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Keyword,
    Distractor,
}

/// A freshly sampled document before labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledDocument {
    pub sentences: Vec<Vec<String>>,
    /// The label the document would get if every negation were detected.
    pub intended_label: Label,
}

/// Controls how often carrier sentences are negated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegationMix {
    /// Probability that the infection sentence is negated.
    pub infection_rate: f64,
    /// Probability that an inflammation sentence is negated.
    pub inflammation_rate: f64,
    /// Probability that a negated carrier uses a phrasing the detector misses.
    pub detector_miss_rate: f64,
}

impl Default for NegationMix {
    fn default() -> Self {
        NegationMix {
            infection_rate: 0.36,
            inflammation_rate: 0.36,
            detector_miss_rate: 0.12,
        }
    }
}

impl NegationMix {
    fn sample<R: Rng>(&self, rate: f64, rng: &mut R) -> Polarity {
        if rng.gen::<f64>() >= rate {
            Polarity::Affirmed
        } else if rng.gen::<f64>() < self.detector_miss_rate {
            Polarity::NegatedOutOfScope
        } else {
            Polarity::Negated
        }
    }
}

fn pick<'a, R: Rng>(
    pool: &'a CarrierPool,
    polarity: Polarity,
    rng: &mut R,
) -> Result<&'a [String]> {
    pool.get(polarity)
        .choose(rng)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Generation(format!("empty carrier pool for polarity {polarity:?}")))
}

/// Samples the sentences of one document. Keyword documents get one infection
/// sentence, one sentence per inflammation group and ten distractors, shuffled.
pub fn sample_document<R: Rng>(
    pool: &SentencePool,
    kind: DocumentKind,
    mix: &NegationMix,
    rng: &mut R,
) -> Result<SampledDocument> {
    let distractors = |n: usize, rng: &mut R| -> Result<Vec<Vec<String>>> {
        (0..n)
            .map(|_| {
                pool.other_sentences
                    .choose(rng)
                    .cloned()
                    .ok_or_else(|| Error::Generation("empty distractor pool".into()))
            })
            .collect()
    };
    match kind {
        DocumentKind::Distractor => Ok(SampledDocument {
            sentences: distractors(SENTENCES_PER_DOCUMENT, rng)?,
            intended_label: Label::NonSeptic,
        }),
        DocumentKind::Keyword => {
            let mut sentences = Vec::with_capacity(SENTENCES_PER_DOCUMENT);
            let infection = mix.sample(mix.infection_rate, rng);
            sentences.push(pick(&pool.infection_sentences, infection, rng)?.to_vec());
            let mut affirmed_groups = 0;
            for group in &pool.inflammation_sentences {
                let polarity = mix.sample(mix.inflammation_rate, rng);
                affirmed_groups += usize::from(!polarity.is_negated());
                sentences.push(pick(group, polarity, rng)?.to_vec());
            }
            sentences.extend(distractors(DISTRACTORS_PER_KEYWORD_DOCUMENT, rng)?);
            sentences.shuffle(rng);
            let intended_label = if !infection.is_negated() && affirmed_groups >= 2 {
                Label::Septic
            } else {
                Label::NonSeptic
            };
            Ok(SampledDocument {
                sentences,
                intended_label,
            })
        }
    }
}

/// Keyword occurrences of one sentence together with their negation status.
fn annotated_hits<'a, S: AsRef<str>>(
    sentence: &'a [S],
    keyword_sets: &KeywordSets,
) -> impl Iterator<Item = (KeywordHit, NegationAnnotation)> + 'a {
    let hits = keyword_sets.find(sentence);
    let starts: Vec<usize> = hits.iter().map(|h| h.start).collect();
    let annotations = detect_negation(sentence, &starts);
    hits.into_iter().zip(annotations)
}

/// Septic iff some infection keyword is not negated and at least two distinct
/// inflammation groups have a non-negated occurrence.
pub fn assign_label<S: AsRef<str>>(sentences: &[Vec<S>], keyword_sets: &KeywordSets) -> Label {
    let mut infection = false;
    let mut groups = BTreeSet::new();
    for sentence in sentences {
        for (hit, ann) in annotated_hits(sentence, keyword_sets) {
            if ann.negated {
                continue;
            }
            match hit.kind {
                KeywordKind::Infection => infection = true,
                KeywordKind::Inflammation(g) => {
                    groups.insert(g);
                }
            }
        }
    }
    if infection && groups.len() >= 2 {
        Label::Septic
    } else {
        Label::NonSeptic
    }
}

/// All keyword tokens plus the negation-scope tokens of negated keywords.
pub fn gold_terms<S: AsRef<str>>(
    sentences: &[Vec<S>],
    keyword_sets: &KeywordSets,
) -> BTreeSet<Position> {
    let mut gold = BTreeSet::new();
    for (s, sentence) in sentences.iter().enumerate() {
        for (hit, ann) in annotated_hits(sentence, keyword_sets) {
            gold.extend((hit.start..hit.start + hit.len).map(|t| (s, t)));
            if ann.negated {
                gold.extend(ann.scope_span.map(|t| (s, t)));
            }
        }
    }
    gold
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub seed: u64,
    pub keyword_docs: usize,
    pub distractor_docs: usize,
    pub mix: NegationMix,
    pub keyword_sets: KeywordSets,
    pub grammar: TemplateGrammar,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 7,
            keyword_docs: 2000,
            distractor_docs: 800,
            mix: NegationMix::default(),
            keyword_sets: KeywordSets::default(),
            grammar: TemplateGrammar::default(),
        }
    }
}

pub const SPLIT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub generation_seed: u64,
    pub keyword_sets: KeywordSets,
    pub split_fractions: (f64, f64, f64),
}

/// Summary numbers recorded next to a generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub documents: usize,
    pub septic_fraction: f64,
    /// Fraction of documents whose label differs from the label they would
    /// carry under perfect negation detection.
    pub label_noise_fraction: f64,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Corpus {
    pub fn from_documents(documents: Vec<Document>, generation_seed: u64) -> Self {
        Corpus {
            documents,
            generation_seed,
            keyword_sets: KeywordSets::default(),
            split_fractions: SPLIT_FRACTIONS,
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| d.split == split)
    }

    pub fn septic_fraction(&self) -> f64 {
        if self.documents.is_empty() {
            return 0.0;
        }
        let septic = self
            .documents
            .iter()
            .filter(|d| d.label == Label::Septic)
            .count();
        septic as f64 / self.documents.len() as f64
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }
}

/// Per-document generator. Each document index gets its own ChaCha stream so
/// documents can be produced in any order.
fn document_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Generates, labels and splits a corpus. Returns it together with its
/// summary statistics.
pub fn generate_corpus(config: &CorpusConfig) -> Result<(Corpus, CorpusStats)> {
    let pool = build_sentence_pool(&config.keyword_sets, &config.grammar, config.seed)?;
    let total = config.keyword_docs + config.distractor_docs;
    let sampled: Vec<(String, SampledDocument)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let (kind, id) = if i < config.keyword_docs {
                (DocumentKind::Keyword, format!("kw{i:06}"))
            } else {
                (
                    DocumentKind::Distractor,
                    format!("ds{:06}", i - config.keyword_docs),
                )
            };
            let mut rng = document_rng(config.seed, i);
            sample_document(&pool, kind, &config.mix, &mut rng).map(|d| (id, d))
        })
        .collect::<Result<_>>()?;

    let mut noisy = 0;
    let mut documents: Vec<Document> = sampled
        .into_iter()
        .map(|(id, sampled)| {
            let label = assign_label(&sampled.sentences, &config.keyword_sets);
            noisy += usize::from(label != sampled.intended_label);
            let gold = gold_terms(&sampled.sentences, &config.keyword_sets);
            Document {
                id,
                sentences: sampled.sentences,
                label,
                gold,
                split: Split::Train,
            }
        })
        .collect();

    let mut order_rng = document_rng(config.seed, usize::MAX - 1);
    documents.shuffle(&mut order_rng);
    let n_train = (total as f64 * SPLIT_FRACTIONS.0).round() as usize;
    let n_valid = (total as f64 * SPLIT_FRACTIONS.1).round() as usize;
    for (i, doc) in documents.iter_mut().enumerate() {
        doc.split = if i < n_train {
            Split::Train
        } else if i < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
    }

    let corpus = Corpus {
        documents,
        generation_seed: config.seed,
        keyword_sets: config.keyword_sets.clone(),
        split_fractions: SPLIT_FRACTIONS,
    };
    let stats = CorpusStats {
        documents: total,
        septic_fraction: corpus.septic_fraction(),
        label_noise_fraction: if total == 0 {
            0.0
        } else {
            noisy as f64 / total as f64
        },
        train: n_train.min(total),
        valid: n_valid.min(total.saturating_sub(n_train)),
        test: total.saturating_sub(n_train + n_valid),
    };
    Ok((corpus, stats))
}
