use std::collections::HashMap;

use hopchain::gleu::{extract_ngrams, gleu, tokenize, TokenSequence};
use proptest::prelude::*;

fn seq(words: &[String]) -> TokenSequence {
    tokenize(&words.join(" "))
}

/// Naive pooled GLEU: list every slice, count matches by scanning.
fn oracle(c: &[String], r: &[String], n_max: usize) -> f64 {
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let slices = |t: &[String]| {
        let mut out = Vec::new();
        for n in 1..=n_max {
            for start in 0..t.len().saturating_sub(n - 1) {
                out.push(t[start..start + n].to_vec());
            }
        }
        out
    };
    let cs = slices(c);
    let mut rs = slices(r);
    let r_total = rs.len();
    let mut matched = 0;
    for g in &cs {
        if let Some(i) = rs.iter().position(|x| x == g) {
            rs.swap_remove(i);
            matched += 1;
        }
    }
    (matched as f64 / cs.len() as f64).min(matched as f64 / r_total as f64)
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_naive_oracle(c in words(12), r in words(12), n_max in 1usize..=6) {
        let got = gleu(&seq(&c), &seq(&r), n_max).unwrap().value;
        prop_assert!((got - oracle(&c, &r, n_max)).abs() <= 1e-12);
    }

    #[test]
    fn symmetric_and_bounded(c in words(15), r in words(15)) {
        let ab = gleu(&seq(&c), &seq(&r), 4).unwrap();
        let ba = gleu(&seq(&r), &seq(&c), 4).unwrap();
        prop_assert_eq!(ab.value, ba.value);
        prop_assert!((0.0..=1.0).contains(&ab.value));
        prop_assert_eq!(ab.value, ab.precision.min(ab.recall));
    }

    #[test]
    fn self_score_is_one(c in words(20)) {
        prop_assert_eq!(gleu(&seq(&c), &seq(&c), 4).unwrap().value, 1.0);
    }

    #[test]
    fn tokenize_is_idempotent(s in "\\PC{0,60}") {
        let once = tokenize(&s);
        prop_assert!(once.tokens().iter().all(|t| !t.is_empty()));
        prop_assert_eq!(tokenize(&once.join()), once);
    }

    #[test]
    fn ngram_totals_per_order(c in words(20), n_max in 1usize..=6) {
        let s = seq(&c);
        let bag = extract_ngrams(&s, n_max).unwrap();
        for n in 1..=n_max {
            prop_assert_eq!(bag.total_of_order(n), s.len().saturating_sub(n - 1));
        }
        prop_assert!(bag.counts().keys().all(|k| (1..=n_max).contains(&k.len())));
        let mut naive: HashMap<Vec<String>, usize> = HashMap::new();
        for n in 1..=n_max {
            for w in s.tokens().windows(n) {
                *naive.entry(w.to_vec()).or_default() += 1;
            }
        }
        prop_assert_eq!(bag.counts(), &naive);
    }
}

#[test]
fn order_zero_is_rejected() {
    assert!(extract_ngrams(&tokenize("a b"), 0).is_err());
    assert!(gleu(&tokenize("a"), &tokenize("a"), 0).is_err());
}

#[test]
fn normalization_examples() {
    assert_eq!(
        tokenize("The cat, the CAT.").tokens(),
        ["the", "cat", "the", "cat"]
    );
    assert!(tokenize("").is_empty());
    // composed and decomposed forms tokenize alike
    assert_eq!(tokenize("Cafe\u{301}"), tokenize("café"));
}
