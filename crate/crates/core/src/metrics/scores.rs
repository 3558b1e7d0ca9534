use super::ngram::{difference, f_measure, ngram_counts, overlap, total};
use crate::error::{Error, Result};
use crate::text::Tokenizer;

/// Highest n-gram order used by [`bleu`] by default.
pub const BLEU_MAX_N: usize = 4;

/// How higher-order BLEU precisions are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BleuSmoothing {
    /// No smoothing; any zero precision makes the score zero.
    None,
    /// Adds one to matched and total counts for orders n ≥ 2.
    #[default]
    AddOne,
}

fn require_reference(reference: &[String]) -> Result<()> {
    if reference.is_empty() {
        return Err(Error::contract("reference text is empty"));
    }
    Ok(())
}

/// ROUGE-N F-measure on token sequences.
pub fn rouge_n_tokens(prediction: &[String], reference: &[String], n: usize) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::contract(format!("ROUGE-N supports n in 1..=2, got {n}")));
    }
    require_reference(reference)?;
    let pred = ngram_counts(prediction, n);
    let refs = ngram_counts(reference, n);
    Ok(f_measure(overlap(&pred, &refs), total(&pred), total(&refs)))
}

/// ROUGE-N F-measure. Predictions shorter than `n` tokens score 0.
pub fn rouge_n(prediction: &str, reference: &str, n: usize, tokenizer: &dyn Tokenizer) -> Result<f64> {
    rouge_n_tokens(&tokenizer.tokenize(prediction), &tokenizer.tokenize(reference), n)
}

/// Sentence-level BLEU on token sequences.
pub fn bleu_tokens(
    prediction: &[String],
    reference: &[String],
    max_n: usize,
    smoothing: BleuSmoothing,
) -> Result<f64> {
    require_reference(reference)?;
    if max_n == 0 {
        return Err(Error::contract("BLEU needs max_n ≥ 1"));
    }
    if prediction.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let pred = ngram_counts(prediction, n);
        let refs = ngram_counts(reference, n);
        let mut matched = overlap(&pred, &refs) as f64;
        let mut possible = total(&pred) as f64;
        if n > 1 && smoothing == BleuSmoothing::AddOne {
            matched += 1.0;
            possible += 1.0;
        }
        if matched == 0.0 || possible == 0.0 {
            return Ok(0.0);
        }
        log_sum += (matched / possible).ln();
    }
    let c = prediction.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(brevity * (log_sum / max_n as f64).exp())
}

pub fn bleu(
    prediction: &str,
    reference: &str,
    tokenizer: &dyn Tokenizer,
    max_n: usize,
    smoothing: BleuSmoothing,
) -> Result<f64> {
    bleu_tokens(&tokenizer.tokenize(prediction), &tokenizer.tokenize(reference), max_n, smoothing)
}

/// Restoration F-measure on token sequences.
///
/// Only n-grams a text adds over the original utterance count (multiset
/// difference). Returns `None` when the reference restores nothing, meaning
/// the sample is excluded from corpus means.
pub fn restoration_f_tokens(
    prediction: &[String],
    reference: &[String],
    original: &[String],
    n: usize,
) -> Result<Option<f64>> {
    require_reference(reference)?;
    if original.is_empty() {
        return Err(Error::contract("original utterance is empty"));
    }
    if n == 0 {
        return Err(Error::contract("n-gram order must be ≥ 1"));
    }
    let orig = ngram_counts(original, n);
    let ref_restored = difference(&ngram_counts(reference, n), &orig);
    if ref_restored.is_empty() {
        return Ok(None);
    }
    let pred_restored = difference(&ngram_counts(prediction, n), &orig);
    Ok(Some(f_measure(
        overlap(&pred_restored, &ref_restored),
        total(&pred_restored),
        total(&ref_restored),
    )))
}

pub fn restoration_f(
    prediction: &str,
    reference: &str,
    original: &str,
    n: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<Option<f64>> {
    restoration_f_tokens(
        &tokenizer.tokenize(prediction),
        &tokenizer.tokenize(reference),
        &tokenizer.tokenize(original),
        n,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::WhitespaceTokenizer;

    const WS: WhitespaceTokenizer = WhitespaceTokenizer;

    #[test]
    fn rouge_identity() {
        assert_eq!(rouge_n("a b c", "a b c", 1, &WS).unwrap(), 1.0);
        assert_eq!(rouge_n("a b c", "a b c", 2, &WS).unwrap(), 1.0);
    }

    #[test]
    fn rouge_hand_values() {
        assert!((rouge_n("a b c", "a b d", 1, &WS).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((rouge_n("a b c", "a b d", 2, &WS).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rouge_short_prediction_scores_zero() {
        assert_eq!(rouge_n("a", "a b", 2, &WS).unwrap(), 0.0);
        assert_eq!(rouge_n("", "a b", 1, &WS).unwrap(), 0.0);
    }

    #[test]
    fn rouge_rejects_bad_input() {
        assert!(rouge_n("a", "", 1, &WS).is_err());
        assert!(rouge_n("a", "a", 3, &WS).is_err());
    }

    #[test]
    fn bleu_identity_and_empty() {
        let s = bleu("a b c d e", "a b c d e", &WS, 4, BleuSmoothing::AddOne).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(bleu("", "a b", &WS, 4, BleuSmoothing::AddOne).unwrap(), 0.0);
    }

    #[test]
    fn bleu_unsmoothed_degenerates() {
        // No 4-gram match, so unsmoothed BLEU collapses to zero.
        assert_eq!(bleu("a b c d", "a b c e", &WS, 4, BleuSmoothing::None).unwrap(), 0.0);
        assert!(bleu("a b c d", "a b c e", &WS, 4, BleuSmoothing::AddOne).unwrap() > 0.0);
    }

    #[test]
    fn restoration_examples() {
        let r = restoration_f(
            "check sapporo boxes",
            "check sapporo containers",
            "check containers",
            1,
            &WS,
        )
        .unwrap()
        .unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);

        let none = restoration_f("check containers", "check sapporo containers", "check containers", 1, &WS);
        assert_eq!(none.unwrap(), Some(0.0));

        let same = restoration_f("x sapporo y", "x sapporo y", "x y", 1, &WS).unwrap();
        assert_eq!(same, Some(1.0));

        let skipped = restoration_f("x y", "x y", "x y", 1, &WS).unwrap();
        assert_eq!(skipped, None);
    }

    #[test]
    fn restoration_counts_multiplicity() {
        // Reference restores "a" twice; prediction once.
        let r = restoration_f("a b", "a a b", "b", 1, &WS).unwrap().unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }
}
