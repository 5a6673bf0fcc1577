//! Skipgram importance: enumeration, scoring from word saliency, vocabulary
//! selection and five-level discretization.
//!
//! A skipgram selects 1 to 4 token positions whose span contains at most two
//! skipped tokens in total. Its key is the selected tokens joined by single
//! spaces, so contiguous and gapped occurrences of the same words share a
//! key.

mod table;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use table::{
    binary_presence_table, build_feature_table, document_features, frequent_keys,
    read_feature_table, read_vocab, skipgram_keys, write_feature_table, write_vocab, FeatureRow,
    FeatureTable,
};

pub const MAX_LENGTH: usize = 4;
pub const MAX_SKIPS: usize = 2;
pub const DEFAULT_TOP_PER_DOC: usize = 50;
pub const DEFAULT_VOCAB_LIMIT: usize = 500;

/// Selected positions of one skipgram, strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Skipgram {
    positions: [u32; MAX_LENGTH],
    len: u8,
}

impl Skipgram {
    pub fn new(positions: &[usize]) -> Self {
        assert!((1..=MAX_LENGTH).contains(&positions.len()));
        let mut p = [0u32; MAX_LENGTH];
        for (slot, &v) in p.iter_mut().zip(positions) {
            *slot = v as u32;
        }
        Skipgram {
            positions: p,
            len: positions.len() as u8,
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions[..self.len as usize].iter().map(|&p| p as usize)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn first(&self) -> usize {
        self.positions[0] as usize
    }

    /// Last position − first position + 1.
    pub fn span(&self) -> usize {
        (self.positions[self.len as usize - 1] - self.positions[0]) as usize + 1
    }

    pub fn key<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        let mut key = String::new();
        for (i, p) in self.positions().enumerate() {
            if i > 0 {
                key.push(' ');
            }
            let tok = tokens[p].as_ref();
            if tok.chars().any(char::is_uppercase) {
                key.push_str(&tok.to_lowercase());
            } else {
                key.push_str(tok);
            }
        }
        key
    }
}

/// All skipgrams of a sequence of `n` tokens, ordered by first position,
/// then length, then span, then positions.
pub fn enumerate_skipgrams(n: usize) -> Vec<Skipgram> {
    let mut out = Vec::new();
    let mut group: Vec<Skipgram> = Vec::new();
    for first in 0..n {
        for len in 1..=MAX_LENGTH {
            group.clear();
            let max_span = len + MAX_SKIPS;
            let last_allowed = (first + max_span - 1).min(n - 1);
            // choose len - 1 further positions from first+1..=last_allowed
            let mut chosen = vec![first];
            extend(&mut chosen, first + 1, last_allowed, len, &mut group);
            group.sort_by_key(|s| (s.span(), s.positions));
            out.extend_from_slice(&group);
        }
    }
    out
}

fn extend(chosen: &mut Vec<usize>, from: usize, last: usize, len: usize, out: &mut Vec<Skipgram>) {
    if chosen.len() == len {
        let span = chosen[len - 1] - chosen[0] + 1;
        if span - len <= MAX_SKIPS {
            out.push(Skipgram::new(chosen));
        }
        return;
    }
    for p in from..=last {
        chosen.push(p);
        extend(chosen, p + 1, last, len, out);
        chosen.pop();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSkipgram {
    pub key: String,
    /// Mean saliency of the selected tokens.
    pub score: f64,
    pub first: usize,
    pub span: usize,
}

/// Scores every skipgram of a document and collapses repeated keys to the
/// occurrence with the largest |score| (the earliest on ties). Keys keep the
/// order of their first occurrence.
pub fn score_skipgrams<S: AsRef<str>>(tokens: &[S], saliency: &[f64]) -> Result<Vec<ScoredSkipgram>> {
    if tokens.len() != saliency.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} tokens but {} saliency scores",
            tokens.len(),
            saliency.len()
        )));
    }
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let mut out: Vec<ScoredSkipgram> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for sg in enumerate_skipgrams(tokens.len()) {
        let score = sg.positions().map(|p| saliency[p]).sum::<f64>() / sg.len() as f64;
        let key = sg.key(tokens);
        match index.get(&key) {
            Some(&i) => {
                if score.abs() > out[i].score.abs() {
                    out[i].score = score;
                    out[i].first = sg.first();
                    out[i].span = sg.span();
                }
            }
            None => {
                index.insert(key.clone(), out.len());
                out.push(ScoredSkipgram {
                    key,
                    score,
                    first: sg.first(),
                    span: sg.span(),
                });
            }
        }
    }
    Ok(out)
}

/// The `k` entries with the largest |score|; ties prefer the earlier first
/// position, then the shorter span, then the smaller key.
pub fn select_document_top(mut scored: Vec<ScoredSkipgram>, k: usize) -> Vec<ScoredSkipgram> {
    scored.sort_by(|a, b| {
        b.score
            .abs()
            .total_cmp(&a.score.abs())
            .then(a.first.cmp(&b.first))
            .then(a.span.cmp(&b.span))
            .then_with(|| a.key.cmp(&b.key))
    });
    scored.truncate(k);
    scored
}

/// Frozen sign-wise median thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub negative: f64,
    pub positive: f64,
}

/// Keys with the highest total |score| over the training documents, plus the
/// discretization thresholds fitted on the same scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramVocab {
    /// Sorted by descending weight, ties by key.
    pub keys: Vec<String>,
    pub weights: Vec<f64>,
    pub thresholds: Thresholds,
}

impl SkipgramVocab {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i))
            .collect()
    }
}

/// Sums |score| per key over the retained lists and keeps the `limit`
/// heaviest keys. Returns `(key, weight)` pairs.
pub fn select_global_vocab(retained: &[Vec<ScoredSkipgram>], limit: usize) -> Vec<(String, f64)> {
    let mut weights: HashMap<&str, f64> = HashMap::new();
    for doc in retained {
        for s in doc {
            *weights.entry(&s.key).or_insert(0.0) += s.score.abs();
        }
    }
    let mut ranked: Vec<(String, f64)> = weights.into_iter().map(|(k, w)| (k.to_owned(), w)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Medians of the negative and of the positive scores. Zero scores are
/// ignored.
pub fn fit_discretizer(scores: impl IntoIterator<Item = f64>) -> Result<Thresholds> {
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for s in scores {
        if s < 0.0 {
            neg.push(s);
        } else if s > 0.0 {
            pos.push(s);
        }
    }
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::DegenerateThresholds(format!(
            "{} negative and {} positive training scores; thresholds need both signs \
             (try the dot or sum pooling, or a larger training split)",
            neg.len(),
            pos.len()
        )));
    }
    Ok(Thresholds {
        negative: median(neg),
        positive: median(pos),
    })
}

/// Fits the vocabulary and thresholds from the per-document scored skipgram
/// lists of the training split. Only each document's top `top_per_doc`
/// entries count; thresholds use the retained scores of in-vocabulary keys.
pub fn fit_vocab(
    train_scored: Vec<Vec<ScoredSkipgram>>,
    top_per_doc: usize,
    limit: usize,
) -> Result<SkipgramVocab> {
    let retained: Vec<Vec<ScoredSkipgram>> = train_scored
        .into_iter()
        .map(|s| select_document_top(s, top_per_doc))
        .collect();
    let ranked = select_global_vocab(&retained, limit);
    let in_vocab: std::collections::HashSet<&str> = ranked.iter().map(|(k, _)| k.as_str()).collect();
    let thresholds = fit_discretizer(
        retained
            .iter()
            .flatten()
            .filter(|s| in_vocab.contains(s.key.as_str()))
            .map(|s| s.score),
    )?;
    let (keys, weights) = ranked.into_iter().unzip();
    Ok(SkipgramVocab {
        keys,
        weights,
        thresholds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    MinusMinus,
    Minus,
    Zero,
    Plus,
    PlusPlus,
}

impl Level {
    pub const ALL: [Level; 5] = [
        Level::MinusMinus,
        Level::Minus,
        Level::Zero,
        Level::Plus,
        Level::PlusPlus,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Level::MinusMinus => "--",
            Level::Minus => "-",
            Level::Zero => "0",
            Level::Plus => "+",
            Level::PlusPlus => "++",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.symbol() == s)
            .ok_or_else(|| format!("unknown level '{s}'"))
    }
}

/// Maps a score to its level; `None` means the skipgram is absent.
pub fn discretize(score: Option<f64>, t: &Thresholds) -> Level {
    match score {
        None => Level::Zero,
        Some(s) if s > t.positive => Level::PlusPlus,
        Some(s) if s >= 0.0 => Level::Plus,
        Some(s) if s >= t.negative => Level::Minus,
        Some(_) => Level::MinusMinus,
    }
}

/// Double-quotes a key, escaping backslashes, quotes, tabs and newlines.
pub fn quote_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len() + 2);
    out.push('"');
    for c in key.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Parses a quoted key at the start of `text`. Returns the key and the
/// remaining input after the closing quote.
pub fn unquote_key(text: &str) -> Result<(String, &str), String> {
    let mut chars = text.char_indices();
    if chars.next().map(|(_, c)| c) != Some('"') {
        return Err(format!("expected '\"' at '{text}'"));
    }
    let mut key = String::new();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((key, &text[i + 1..])),
            '\\' => match chars.next().map(|(_, c)| c) {
                Some('"') => key.push('"'),
                Some('\\') => key.push('\\'),
                Some('t') => key.push('\t'),
                Some('n') => key.push('\n'),
                other => return Err(format!("bad escape {other:?}")),
            },
            c => key.push(c),
        }
    }
    Err("unterminated quoted key".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 1u32..(1 << n) {
            let pos: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if pos.len() <= 4 && pos[pos.len() - 1] - pos[0] + 1 - pos.len() <= 2 {
                out.push(pos);
            }
        }
        out
    }

    #[test]
    fn four_tokens_give_fifteen() {
        let all = enumerate_skipgrams(4);
        assert_eq!(all.len(), 15);
        let by_len: Vec<usize> = (1..=4).map(|l| all.iter().filter(|s| s.len() == l).count()).collect();
        assert_eq!(by_len, vec![4, 6, 4, 1]);
    }

    #[test]
    fn single_token() {
        assert_eq!(enumerate_skipgrams(1), vec![Skipgram::new(&[0])]);
        assert!(enumerate_skipgrams(0).is_empty());
    }

    #[test]
    fn matches_brute_force_up_to_eight() {
        for n in 1..=8 {
            let mut got: Vec<Vec<usize>> = enumerate_skipgrams(n).iter().map(|s| s.positions().collect()).collect();
            let mut want = brute_force(n);
            got.sort();
            want.sort();
            assert_eq!(got, want, "n = {n}");
        }
    }

    #[test]
    fn enumeration_order() {
        let all = enumerate_skipgrams(5);
        let keys: Vec<(usize, usize, usize)> = all.iter().map(|s| (s.first(), s.len(), s.span())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(all[0], Skipgram::new(&[0]));
        assert_eq!(all[1], Skipgram::new(&[0, 1]));
    }

    #[test]
    fn gapped_key_omits_skipped_tokens() {
        let tokens = ["or", "signs", "of", "infection"];
        assert_eq!(Skipgram::new(&[0, 2, 3]).key(&tokens), "or of infection");
    }

    #[test]
    fn scoring_examples() {
        let scored = score_skipgrams(&["a", "b"], &[0.2, -0.4]).unwrap();
        let ab = scored.iter().find(|s| s.key == "a b").unwrap();
        assert!((ab.score - -0.1).abs() < 1e-12);
        assert_eq!(scored.iter().find(|s| s.key == "a").unwrap().score, 0.2);
    }

    #[test]
    fn repeated_key_keeps_largest_magnitude() {
        let scored = score_skipgrams(&["x", "y", "x"], &[0.3, 0.0, -0.5]).unwrap();
        let x = scored.iter().find(|s| s.key == "x").unwrap();
        assert_eq!(x.score, -0.5);
        assert_eq!(x.first, 2);
        assert_eq!(scored.iter().filter(|s| s.key == "x").count(), 1);
    }

    #[test]
    fn repeated_key_magnitude_tie_keeps_earliest() {
        let scored = score_skipgrams(&["x", "y", "x"], &[0.5, 0.0, -0.5]).unwrap();
        let x = scored.iter().find(|s| s.key == "x").unwrap();
        assert_eq!((x.score, x.first), (0.5, 0));
    }

    fn s(key: &str, score: f64, first: usize, span: usize) -> ScoredSkipgram {
        ScoredSkipgram {
            key: key.into(),
            score,
            first,
            span,
        }
    }

    #[test]
    fn top_selection() {
        let scored = vec![s("a", 0.9, 0, 1), s("b", -0.8, 1, 1), s("c", 0.1, 2, 1)];
        let top = select_document_top(scored.clone(), 2);
        assert_eq!(top.iter().map(|x| x.key.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(select_document_top(scored, 50).len(), 3);
        let tied = vec![s("late", 0.5, 4, 1), s("early", -0.5, 1, 2), s("short", 0.5, 1, 1)];
        let top = select_document_top(tied, 2);
        assert_eq!(top.iter().map(|x| x.key.as_str()).collect::<Vec<_>>(), ["short", "early"]);
    }

    #[test]
    fn global_weights() {
        let docs = vec![
            vec![s("spread", 0.2, 0, 1), s("single", 0.5, 1, 1)],
            vec![s("spread", 0.2, 0, 1)],
            vec![s("spread", -0.2, 0, 1), s("neg", -0.7, 1, 1)],
        ];
        let vocab = select_global_vocab(&docs, 10);
        assert_eq!(vocab[0].0, "neg");
        assert!((vocab[0].1 - 0.7).abs() < 1e-12);
        assert_eq!(vocab[1].0, "spread");
        assert_eq!(vocab[2].0, "single");
        assert_eq!(select_global_vocab(&docs, 1).len(), 1);
    }

    #[test]
    fn weight_ties_are_lexicographic() {
        let docs = vec![vec![s("b", 0.5, 0, 1), s("a", -0.5, 1, 1)]];
        let vocab = select_global_vocab(&docs, 10);
        assert_eq!(vocab[0].0, "a");
    }

    #[test]
    fn thresholds_are_sign_medians() {
        let t = fit_discretizer([0.1, 0.2, 0.3, -1.0]).unwrap();
        assert_eq!(t.positive, 0.2);
        assert_eq!(t.negative, -1.0);
        let sym = fit_discretizer([0.1, 0.4, -0.1, -0.4]).unwrap();
        assert_eq!(sym.negative, -sym.positive);
        assert!(matches!(fit_discretizer([0.1, 0.2]), Err(Error::DegenerateThresholds(_))));
    }

    #[test]
    fn discretization_levels() {
        let t = Thresholds {
            negative: -0.2,
            positive: 0.3,
        };
        assert_eq!(discretize(None, &t), Level::Zero);
        assert_eq!(discretize(Some(0.3), &t), Level::Plus);
        assert_eq!(discretize(Some(0.31), &t), Level::PlusPlus);
        assert_eq!(discretize(Some(0.0), &t), Level::Plus);
        assert_eq!(discretize(Some(-0.2), &t), Level::Minus);
        assert_eq!(discretize(Some(-0.21), &t), Level::MinusMinus);
    }

    #[test]
    fn level_symbols_round_trip() {
        for l in Level::ALL {
            assert_eq!(l.symbol().parse::<Level>().unwrap(), l);
        }
    }

    #[test]
    fn key_quoting_round_trips() {
        for key in ["no infection", "say \"hi\"", "back\\slash", "tab\there", ""] {
            let quoted = quote_key(key);
            let (back, rest) = unquote_key(&quoted).unwrap();
            assert_eq!(back, key);
            assert!(rest.is_empty());
        }
        assert_eq!(quote_key("a\"b"), "\"a\\\"b\"");
        assert!(unquote_key("\"open").is_err());
    }
}
