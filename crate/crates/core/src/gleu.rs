//! Text normalization, n-gram extraction and GLEU scoring.
//!
//! GLEU pools clipped n-gram matches over every order `1..=n_max` and takes
//! the minimum of the resulting precision and recall. Both texts go through
//! [`tokenize`] first so casing and punctuation noise introduced by a
//! translation service does not count against a hop.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Default n-gram order bound.
pub const DEFAULT_MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GleuError {
    #[error("n-gram order bound must be at least 1, got {0}")]
    InvalidOrder(usize),
}

/// Normalized word tokens. Only [`tokenize`] builds one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

fn is_boundary_junk(c: char) -> bool {
    !(c.is_alphanumeric() || is_combining_mark(c))
}

/// NFC-normalize, lowercase, split on unicode whitespace and strip
/// punctuation and symbols from both ends of every token.
///
/// Tokens that consist only of punctuation disappear.
pub fn tokenize(text: &str) -> TokenSequence {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    let normalized: String = lowered.nfc().collect();
    let tokens = normalized
        .split_whitespace()
        .map(|raw| raw.trim_matches(is_boundary_junk))
        .filter(|tok| !tok.is_empty())
        .map(str::to_owned)
        .collect();
    TokenSequence(tokens)
}

/// Multiset of contiguous n-grams of every order `1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramBag {
    n_max: usize,
    counts: HashMap<Vec<String>, usize>,
}

impl NGramBag {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn counts(&self) -> &HashMap<Vec<String>, usize> {
        &self.counts
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Number of n-gram occurrences, summed over all orders.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Number of occurrences of n-grams of exactly length `n`.
    pub fn total_of_order(&self, n: usize) -> usize {
        self.counts
            .iter()
            .filter(|(k, _)| k.len() == n)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Clipped overlap: sum over n-grams of the smaller of the two counts.
    pub fn clipped_matches(&self, other: &NGramBag) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(gram, &c)| c.min(large.count(gram)))
            .sum()
    }
}

pub fn extract_ngrams(seq: &TokenSequence, n_max: usize) -> Result<NGramBag, GleuError> {
    if n_max < 1 {
        return Err(GleuError::InvalidOrder(n_max));
    }
    let tokens = seq.tokens();
    let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
    for n in 1..=n_max.min(tokens.len()) {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    Ok(NGramBag { n_max, counts })
}

/// A GLEU score with the precision and recall it was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GleuScore {
    pub value: f64,
    pub precision: f64,
    pub recall: f64,
}

impl GleuScore {
    fn from_parts(precision: f64, recall: f64) -> Self {
        GleuScore {
            value: precision.min(recall),
            precision,
            recall,
        }
    }
}

/// Sentence-level GLEU of `candidate` against `reference`.
///
/// Two empty texts are identical and score 1. Exactly one empty text
/// scores 0.
pub fn gleu(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    n_max: usize,
) -> Result<GleuScore, GleuError> {
    let cand = extract_ngrams(candidate, n_max)?;
    let refr = extract_ngrams(reference, n_max)?;
    Ok(score_bags(&cand, &refr))
}

/// GLEU over pre-extracted bags. Useful when one side is scored many times.
pub fn score_bags(candidate: &NGramBag, reference: &NGramBag) -> GleuScore {
    let cand_total = candidate.total();
    let ref_total = reference.total();
    match (cand_total, ref_total) {
        (0, 0) => GleuScore::from_parts(1.0, 1.0),
        (0, _) | (_, 0) => GleuScore::from_parts(0.0, 0.0),
        _ => {
            let matches = candidate.clipped_matches(reference) as f64;
            GleuScore::from_parts(matches / cand_total as f64, matches / ref_total as f64)
        }
    }
}

/// Convenience: tokenize both texts and score with the default order bound.
pub fn gleu_text(candidate: &str, reference: &str) -> GleuScore {
    score_bags(
        &extract_ngrams(&tokenize(candidate), DEFAULT_MAX_ORDER).expect("default order is valid"),
        &extract_ngrams(&tokenize(reference), DEFAULT_MAX_ORDER).expect("default order is valid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &[&str]) -> TokenSequence {
        tokenize(&words.join(" "))
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n ").is_empty());
        assert!(tokenize(" ... , ! ").is_empty());
    }

    #[test]
    fn casing_and_punctuation_are_normalized() {
        assert_eq!(
            tokenize("The cat, the CAT.").tokens(),
            ["the", "cat", "the", "cat"]
        );
    }

    #[test]
    fn inner_punctuation_is_kept() {
        assert_eq!(
            tokenize("\"esforçar-nos-emos\"").tokens(),
            ["esforçar-nos-emos"]
        );
        assert_eq!(tokenize("(10),").tokens(), ["10"]);
    }

    #[test]
    fn decomposed_and_composed_forms_match() {
        assert_eq!(tokenize("Herácl\u{0069}to"), tokenize("Hera\u{0301}clito"));
    }

    #[test]
    fn rejects_zero_order() {
        assert_eq!(
            extract_ngrams(&seq(&["a"]), 0),
            Err(GleuError::InvalidOrder(0))
        );
        assert!(gleu(&seq(&["a"]), &seq(&["a"]), 0).is_err());
    }

    #[test]
    fn ngram_bag_of_single_token() {
        let bag = extract_ngrams(&seq(&["a"]), 2).unwrap();
        assert_eq!(bag.counts().len(), 1);
        assert_eq!(bag.count(&["a".to_string()]), 1);
    }

    #[test]
    fn ngram_bag_of_three_tokens() {
        let bag = extract_ngrams(&seq(&["the", "cat", "sat"]), 2).unwrap();
        let expected: HashMap<Vec<String>, usize> = [
            vec!["the"],
            vec!["cat"],
            vec!["sat"],
            vec!["the", "cat"],
            vec!["cat", "sat"],
        ]
        .into_iter()
        .map(|g| (g.into_iter().map(String::from).collect(), 1))
        .collect();
        assert_eq!(bag.counts(), &expected);
    }

    #[test]
    fn empty_sequence_gives_empty_bag() {
        assert!(extract_ngrams(&TokenSequence::default(), 4)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn worked_example() {
        let s = gleu(&seq(&["the", "cat"]), &seq(&["the", "cat", "sat"]), 2).unwrap();
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.6);
        assert_eq!(s.value, 0.6);
    }

    #[test]
    fn identity_and_disjoint() {
        let t = seq(&["for", "him", "each", "reading"]);
        assert_eq!(gleu(&t, &t, 4).unwrap().value, 1.0);
        assert_eq!(
            gleu(&seq(&["a", "b"]), &seq(&["c", "d"]), 4).unwrap().value,
            0.0
        );
    }

    #[test]
    fn degenerate_empty_cases() {
        let empty = TokenSequence::default();
        let some = seq(&["x"]);
        assert_eq!(gleu(&empty, &empty, 4).unwrap().value, 1.0);
        assert_eq!(gleu(&empty, &some, 4).unwrap().value, 0.0);
        assert_eq!(gleu(&some, &empty, 4).unwrap().value, 0.0);
    }

    #[test]
    fn repeated_tokens_are_clipped() {
        // candidate "a a a a" vs reference "a": unigram match clipped at 1
        let s = gleu(&seq(&["a", "a", "a", "a"]), &seq(&["a"]), 1).unwrap();
        assert_eq!(s.precision, 0.25);
        assert_eq!(s.recall, 1.0);
    }
}
