use serde::{Deserialize, Serialize};

use super::scores::{bleu_tokens, restoration_f_tokens, rouge_n_tokens, BleuSmoothing, BLEU_MAX_N};
use crate::error::{Error, Result};
use crate::text::Tokenizer;

/// One evaluation triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub id: String,
    pub prediction: String,
    pub reference: String,
    pub original: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub id: String,
    pub rouge1: f64,
    pub rouge2: f64,
    pub bleu: f64,
    /// `None` when the reference restores nothing at this order.
    pub f1: Option<f64>,
    pub f2: Option<f64>,
}

/// Corpus scores in `[0, 1]`, macro-averaged over samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge1: f64,
    pub rouge2: f64,
    pub bleu: f64,
    pub f1: f64,
    pub f2: f64,
    /// Samples contributing to `f1` / `f2`.
    pub f1_count: usize,
    pub f2_count: usize,
    pub samples: Vec<SampleScores>,
}

impl EvalReport {
    /// Scores ×100, in table order RG-1, RG-2, BL, f1, f2.
    pub fn display_row(&self) -> [f64; 5] {
        [self.rouge1, self.rouge2, self.bleu, self.f1, self.f2].map(|v| v * 100.0)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

pub fn score_sample(sample: &EvalSample, tokenizer: &dyn Tokenizer) -> Result<SampleScores> {
    let pred = tokenizer.tokenize(&sample.prediction);
    let reference = tokenizer.tokenize(&sample.reference);
    let orig = tokenizer.tokenize(&sample.original);
    let ctx = |e: Error| Error::Validation(format!("sample {}: {e}", sample.id));
    Ok(SampleScores {
        id: sample.id.clone(),
        rouge1: rouge_n_tokens(&pred, &reference, 1).map_err(ctx)?,
        rouge2: rouge_n_tokens(&pred, &reference, 2).map_err(ctx)?,
        bleu: bleu_tokens(&pred, &reference, BLEU_MAX_N, BleuSmoothing::AddOne).map_err(ctx)?,
        f1: restoration_f_tokens(&pred, &reference, &orig, 1).map_err(ctx)?,
        f2: restoration_f_tokens(&pred, &reference, &orig, 2).map_err(ctx)?,
    })
}

/// Scores every sample and macro-averages.
pub fn evaluate(samples: &[EvalSample], tokenizer: &dyn Tokenizer) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::contract("no samples to evaluate"));
    }
    let scored = samples
        .iter()
        .map(|s| score_sample(s, tokenizer))
        .collect::<Result<Vec<_>>>()?;
    let (rouge1, _) = mean(scored.iter().map(|s| s.rouge1));
    let (rouge2, _) = mean(scored.iter().map(|s| s.rouge2));
    let (bleu, _) = mean(scored.iter().map(|s| s.bleu));
    let (f1, f1_count) = mean(scored.iter().filter_map(|s| s.f1));
    let (f2, f2_count) = mean(scored.iter().filter_map(|s| s.f2));
    Ok(EvalReport {
        rouge1,
        rouge2,
        bleu,
        f1,
        f2,
        f1_count,
        f2_count,
        samples: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::WhitespaceTokenizer;

    fn sample(id: &str, p: &str, r: &str, o: &str) -> EvalSample {
        EvalSample {
            id: id.into(),
            prediction: p.into(),
            reference: r.into(),
            original: o.into(),
        }
    }

    #[test]
    fn macro_average_skips_unrestored_f() {
        let report = evaluate(
            &[
                sample("a", "check sapporo containers", "check sapporo containers", "check containers"),
                sample("b", "ok", "ok", "ok"),
            ],
            &WhitespaceTokenizer,
        )
        .unwrap();
        assert_eq!(report.rouge1, 1.0);
        assert_eq!(report.f1_count, 1);
        assert_eq!(report.f1, 1.0);
        // "ok" has no bigrams on either side, so only sample a counts at n = 2.
        assert_eq!(report.f2_count, 1);
        assert_eq!(report.display_row()[0], 100.0);
    }

    #[test]
    fn empty_reference_names_sample() {
        let err = evaluate(&[sample("z", "a", "", "a")], &WhitespaceTokenizer).unwrap_err();
        assert!(err.to_string().contains("sample z"));
    }
}
