//! Generation metrics and human-evaluation aggregation.
//!
//! All automatic scores are sentence level and lie in `[0, 1]`. Corpus
//! figures are macro averages of per-sample scores.

mod human;
mod ngram;
mod report;
mod scores;

pub use human::{aggregate_scores, Criterion, CriterionSummary, ScoreEntry, ScoreSheet};
pub use report::{evaluate, score_sample, EvalReport, EvalSample, SampleScores};
pub use scores::{
    bleu, bleu_tokens, restoration_f, restoration_f_tokens, rouge_n, rouge_n_tokens, BleuSmoothing,
    BLEU_MAX_N,
};
