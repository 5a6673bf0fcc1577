use serde::{Deserialize, Serialize};

/// A keyword phrase, stored as its lowercase tokens.
pub type Phrase = Vec<String>;

/// Infection keywords (one flat list) and inflammatory-response criteria
/// (one group per criterion, alternatives within a group are OR-ed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSets {
    pub infection_terms: Vec<Phrase>,
    pub inflammation_groups: Vec<Vec<Phrase>>,
}

/// Which labeling set a keyword occurrence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeywordKind {
    Infection,
    /// Index into [`KeywordSets::inflammation_groups`].
    Inflammation(usize),
}

/// One keyword phrase located inside a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeywordHit {
    pub start: usize,
    pub len: usize,
    pub kind: KeywordKind,
}

fn phrase(text: &str) -> Phrase {
    text.split_whitespace().map(str::to_owned).collect()
}

impl Default for KeywordSets {
    fn default() -> Self {
        KeywordSets {
            infection_terms: [
                "pneumonia",
                "empyema",
                "meningitis",
                "endocarditis",
                "infection",
            ]
            .into_iter()
            .map(phrase)
            .collect(),
            inflammation_groups: vec![
                vec![phrase("hypothermia"), phrase("hyperthermia")],
                vec![phrase("leukocytosis"), phrase("leukopenia")],
                vec![phrase("altered mental status")],
                vec![phrase("tachycardia")],
                vec![phrase("tachypnea")],
                vec![phrase("hyperglycemia")],
            ],
        }
    }
}

impl KeywordSets {
    /// Checks the structural invariants: non-empty groups, disjoint sets and
    /// the minimum sizes of both sets.
    pub fn validate(&self) -> Result<(), String> {
        if self.infection_terms.len() < 4 {
            return Err(format!(
                "infection set needs at least 4 terms, got {}",
                self.infection_terms.len()
            ));
        }
        if self.inflammation_groups.len() < 6 {
            return Err(format!(
                "inflammation set needs at least 6 groups, got {}",
                self.inflammation_groups.len()
            ));
        }
        if let Some(i) = self.inflammation_groups.iter().position(Vec::is_empty) {
            return Err(format!("inflammation group {i} is empty"));
        }
        for term in &self.infection_terms {
            if term.is_empty() {
                return Err("empty infection phrase".into());
            }
            if self.inflammation_groups.iter().flatten().any(|p| p == term) {
                return Err(format!("'{}' is in both keyword sets", term.join(" ")));
            }
        }
        Ok(())
    }

    fn all_phrases(&self) -> impl Iterator<Item = (&Phrase, KeywordKind)> {
        self.infection_terms
            .iter()
            .map(|p| (p, KeywordKind::Infection))
            .chain(
                self.inflammation_groups
                    .iter()
                    .enumerate()
                    .flat_map(|(g, group)| {
                        group.iter().map(move |p| (p, KeywordKind::Inflammation(g)))
                    }),
            )
    }

    /// Locates keyword phrases in a sentence, scanning left to right and
    /// preferring the longest phrase at each position. Hits never overlap.
    pub fn find<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<KeywordHit> {
        let mut hits = Vec::new();
        let mut pos = 0;
        while pos < sentence.len() {
            let best = self
                .all_phrases()
                .filter(|(p, _)| matches_at(sentence, pos, p))
                .max_by_key(|(p, _)| p.len());
            match best {
                Some((p, kind)) => {
                    hits.push(KeywordHit {
                        start: pos,
                        len: p.len(),
                        kind,
                    });
                    pos += p.len();
                }
                None => pos += 1,
            }
        }
        hits
    }

    pub fn contains_keyword<S: AsRef<str>>(&self, sentence: &[S]) -> bool {
        (0..sentence.len()).any(|pos| {
            self.all_phrases()
                .any(|(p, _)| matches_at(sentence, pos, p))
        })
    }

    /// Every token that is part of some keyword phrase.
    pub fn keyword_tokens(&self) -> impl Iterator<Item = &str> {
        self.all_phrases()
            .flat_map(|(p, _)| p.iter().map(String::as_str))
    }
}

fn matches_at<S: AsRef<str>>(sentence: &[S], pos: usize, phrase: &[String]) -> bool {
    pos + phrase.len() <= sentence.len()
        && phrase
            .iter()
            .zip(&sentence[pos..])
            .all(|(p, s)| p == s.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn default_sets_are_valid() {
        KeywordSets::default().validate().unwrap();
    }

    #[test]
    fn finds_multi_token_phrase() {
        let sets = KeywordSets::default();
        let hits = sets.find(&toks("altered mental status exists ."));
        assert_eq!(
            hits,
            vec![KeywordHit {
                start: 0,
                len: 3,
                kind: KeywordKind::Inflammation(2)
            }]
        );
    }

    #[test]
    fn finds_both_infection_terms() {
        let sets = KeywordSets::default();
        let hits = sets.find(&toks("no pneumonia and empyema"));
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.kind == KeywordKind::Infection));
        assert_eq!(hits[1].start, 3);
    }

    #[test]
    fn partial_phrase_is_not_a_keyword() {
        let sets = KeywordSets::default();
        assert!(!sets.contains_keyword(&toks("mental status exam normal")));
    }

    #[test]
    fn overlapping_sets_rejected() {
        let mut sets = KeywordSets::default();
        sets.infection_terms.push(vec!["tachycardia".into()]);
        assert!(sets.validate().is_err());
    }
}
