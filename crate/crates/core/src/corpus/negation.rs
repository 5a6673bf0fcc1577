//! Rule-based negation detection.
//!
//! A keyword is negated when a trigger from [`TRIGGERS`] ends at most
//! [`SCOPE_WINDOW`] tokens before the keyword and no scope-breaking token
//! (punctuation or "but") sits between the two. Triggers after the keyword
//! are never considered, so phrasings like "infection was ruled out" are
//! missed on purpose: the resulting label noise is part of the corpus.

use std::ops::Range;

/// Negation triggers, as token sequences.
pub const TRIGGERS: &[&[&str]] = &[
    &["no"],
    &["not"],
    &["without"],
    &["denies"],
    &["negative"],
    &["ruled", "out"],
    &["unlikely"],
];

/// Maximum distance from the last trigger token to the keyword start.
pub const SCOPE_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationAnnotation {
    /// Start index of the keyword this annotation belongs to.
    pub keyword: usize,
    pub negated: bool,
    /// Tokens of the trigger itself. Empty when not negated.
    pub trigger_span: Range<usize>,
    /// Trigger start up to (excluding) the keyword: the tokens that carry
    /// the negation, e.g. "no signs of" in "no signs of infection". Empty when
    /// not negated.
    pub scope_span: Range<usize>,
}

pub fn is_scope_breaker(token: &str) -> bool {
    token == "but" || (!token.is_empty() && token.chars().all(|c| c.is_ascii_punctuation()))
}

/// Returns the trigger length if a trigger ends at `end` (inclusive).
fn trigger_ending_at<S: AsRef<str>>(sentence: &[S], end: usize) -> Option<usize> {
    TRIGGERS
        .iter()
        .filter(|t| t.len() <= end + 1)
        .find(|t| {
            let start = end + 1 - t.len();
            t.iter()
                .zip(&sentence[start..=end])
                .all(|(a, b)| *a == b.as_ref())
        })
        .map(|t| t.len())
}

/// Annotates each keyword position. Total: positions past the end of the
/// sentence are reported as not negated.
pub fn detect_negation<S: AsRef<str>>(
    sentence: &[S],
    keyword_positions: &[usize],
) -> Vec<NegationAnnotation> {
    keyword_positions
        .iter()
        .map(|&k| annotate(sentence, k))
        .collect()
}

fn annotate<S: AsRef<str>>(sentence: &[S], keyword: usize) -> NegationAnnotation {
    let not_negated = NegationAnnotation {
        keyword,
        negated: false,
        trigger_span: keyword..keyword,
        scope_span: keyword..keyword,
    };
    if keyword > sentence.len() {
        return not_negated;
    }
    // Walk left from the keyword; the nearest trigger wins.
    for end in (keyword.saturating_sub(SCOPE_WINDOW)..keyword).rev() {
        if let Some(len) = trigger_ending_at(sentence, end) {
            let start = end + 1 - len;
            return NegationAnnotation {
                keyword,
                negated: true,
                trigger_span: start..end + 1,
                scope_span: start..keyword,
            };
        }
        if is_scope_breaker(sentence[end].as_ref()) {
            break;
        }
    }
    not_negated
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn no_signs_of_infection() {
        let s = toks("no signs of infection were found .");
        let ann = detect_negation(&s, &[3]);
        assert!(ann[0].negated);
        assert_eq!(ann[0].trigger_span, 0..1);
        assert_eq!(ann[0].scope_span, 0..3);
    }

    #[test]
    fn affirmative_sentence() {
        let s = toks("patient is suffering from hypothermia");
        assert!(!detect_negation(&s, &[4])[0].negated);
    }

    #[test]
    fn but_breaks_scope() {
        let s = toks("denies fever but tachycardia present");
        assert!(!detect_negation(&s, &[3])[0].negated);
    }

    #[test]
    fn punctuation_breaks_scope() {
        let s = toks("no fever , tachycardia");
        assert!(!detect_negation(&s, &[3])[0].negated);
    }

    #[test]
    fn window_is_five_tokens() {
        let s = toks("no a b c d tachycardia");
        assert!(detect_negation(&s, &[5])[0].negated);
        let s = toks("no a b c d e tachycardia");
        assert!(!detect_negation(&s, &[6])[0].negated);
    }

    #[test]
    fn two_token_trigger() {
        let s = toks("ruled out meningitis today");
        let ann = detect_negation(&s, &[2]);
        assert!(ann[0].negated);
        assert_eq!(ann[0].trigger_span, 0..2);
    }

    #[test]
    fn trigger_after_keyword_is_missed() {
        let s = toks("meningitis was ruled out");
        assert!(!detect_negation(&s, &[0])[0].negated);
    }

    #[test]
    fn nearest_trigger_wins() {
        let s = toks("not clear , no tachycardia");
        let ann = detect_negation(&s, &[4]);
        assert_eq!(ann[0].trigger_span, 3..4);
    }
}
