use std::collections::HashMap;

use super::EvalError;
use crate::graph::{parse_delta, GraphDelta};
use crate::tasks::tokenize;

/// Unigram F1 over lowercase whitespace tokens with multiset overlap.
///
/// Two empty strings score 1.0; exactly one empty string scores 0.0.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let pred: Vec<String> = tokenize(prediction).collect();
    let gold: Vec<String> = tokenize(gold).collect();
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// `exp` of the mean negative log-likelihood of the gold tokens.
pub fn perplexity(token_logprobs: &[f64]) -> Result<f64, EvalError> {
    if token_logprobs.is_empty() {
        return Err(EvalError::EmptySequence);
    }
    if let Some((index, &value)) = token_logprobs.iter().enumerate().find(|(_, lp)| **lp > 0.0 || lp.is_nan()) {
        return Err(EvalError::PositiveLogprob { index, value });
    }
    let mean_nll = -token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok(mean_nll.exp())
}

/// Outcome of comparing predicted delta text with a gold delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMatch {
    Match,
    Mismatch,
    Unparseable,
}

/// Order-insensitive comparison of mutation sets; see [`delta_exact_match`].
pub fn delta_match(prediction: &str, gold: &GraphDelta) -> DeltaMatch {
    match parse_delta(prediction) {
        Ok(p) if p.mutation_set() == gold.mutation_set() && p.is_no_mutation() == gold.is_no_mutation() => {
            DeltaMatch::Match
        }
        Ok(_) => DeltaMatch::Mismatch,
        Err(_) => DeltaMatch::Unparseable,
    }
}

/// True iff the prediction parses to the same mutations as `gold`, in any
/// line order, or both are `NO_MUTATION`. Unparseable text never matches.
pub fn delta_exact_match(prediction: &str, gold: &GraphDelta) -> bool {
    delta_match(prediction, gold) == DeltaMatch::Match
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_hand_arithmetic() {
        assert_eq!(token_f1("you get the staff", "you get the staff"), 1.0);
        assert!((token_f1("you get the staff", "you drop the staff") - 0.75).abs() < 1e-12);
        assert_eq!(token_f1("a b", "c d"), 0.0);
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("", "x"), 0.0);
        assert_eq!(token_f1("x", "  "), 0.0);
        // Multiset: a repeated token counts once per gold occurrence.
        // p = 1/3, r = 1/1 -> f1 = 0.5
        assert!((token_f1("the the the", "the") - 0.5).abs() < 1e-12);
        assert_eq!(token_f1("The Staff", "the staff"), 1.0);
    }

    #[test]
    fn perplexity_cases() {
        let quarter = (0.25f64).ln();
        assert!((perplexity(&[quarter; 7]).unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(perplexity(&[0.0, 0.0]).unwrap(), 1.0);
        let mixed = perplexity(&[(0.5f64).ln(), (0.125f64).ln()]).unwrap();
        assert!((mixed - 4.0).abs() < 1e-9);
        assert_eq!(perplexity(&[]), Err(EvalError::EmptySequence));
        assert!(matches!(perplexity(&[-1.0, 0.5]), Err(EvalError::PositiveLogprob { index: 1, .. })));
    }

    #[test]
    fn delta_matching() {
        let gold = parse_delta("DEL: staff IS_INSIDE room\nADD: wizard IS_CARRYING staff").unwrap();
        assert!(delta_exact_match("ADD: wizard IS_CARRYING staff\nDEL: staff IS_INSIDE room", &gold));
        assert_eq!(delta_match("ADD: wizard IS_CARRYING staff", &gold), DeltaMatch::Mismatch);
        assert_eq!(delta_match("garbage", &GraphDelta::NoMutation), DeltaMatch::Unparseable);
        assert!(delta_exact_match("NO_MUTATION", &GraphDelta::NoMutation));
        assert!(!delta_exact_match("NO_MUTATION", &gold));
    }
}
