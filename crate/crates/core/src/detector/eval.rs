use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::corpus::{DecisionLabel, DecisionTag};
use crate::error::{Error, Result};

/// Confusion counts for the TD class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl TagCounts {
    pub fn add(&mut self, other: TagCounts) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.false_negative += other.false_negative;
        self.true_negative += other.true_negative;
    }

    pub fn record(&mut self, predicted: DecisionTag, gold: DecisionTag) {
        match (predicted.is_decision(), gold.is_decision()) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, true) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
    }

    /// Precision, recall and F1; each is 0 when its denominator is 0.
    pub fn scores(&self) -> DetectionScores {
        let tp = self.true_positive as f64;
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        let precision = ratio(tp, tp + self.false_positive as f64);
        let recall = ratio(tp, tp + self.false_negative as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        DetectionScores {
            precision,
            recall,
            f1,
            counts: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: TagCounts,
}

/// Confusion counts over one meeting's labels, matched by utterance id.
pub fn tag_counts(predicted: &[DecisionLabel], gold: &[DecisionLabel]) -> Result<TagCounts> {
    let pred: HashMap<&str, DecisionTag> =
        predicted.iter().map(|l| (l.utterance_id.as_str(), l.tag)).collect();
    let gold_map: HashMap<&str, DecisionTag> =
        gold.iter().map(|l| (l.utterance_id.as_str(), l.tag)).collect();
    let mut missing: Vec<&str> = gold_map.keys().filter(|k| !pred.contains_key(*k)).copied().collect();
    let mut extra: Vec<&str> = pred.keys().filter(|k| !gold_map.contains_key(*k)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        missing.sort();
        extra.sort();
        return Err(Error::contract(format!(
            "label coverage mismatch; missing predictions for {missing:?}, no gold for {extra:?}"
        )));
    }
    let mut counts = TagCounts::default();
    for (id, g) in &gold_map {
        counts.record(pred[id], *g);
    }
    Ok(counts)
}

/// Precision, recall and F1 of the TD class.
pub fn detector_eval(predicted: &[DecisionLabel], gold: &[DecisionLabel]) -> Result<DetectionScores> {
    Ok(tag_counts(predicted, gold)?.scores())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSource;

    fn labels(td: &[usize], n: usize, source: LabelSource) -> Vec<DecisionLabel> {
        (0..n)
            .map(|i| DecisionLabel {
                utterance_id: format!("u{i}"),
                tag: DecisionTag::from_bool(td.contains(&i)),
                source,
            })
            .collect()
    }

    #[test]
    fn perfect_match() {
        let g = labels(&[1], 4, LabelSource::Gold);
        let s = detector_eval(&labels(&[1], 4, LabelSource::Predicted), &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_overlap() {
        let s = detector_eval(
            &labels(&[1, 2], 5, LabelSource::Predicted),
            &labels(&[2, 3], 5, LabelSource::Gold),
        )
        .unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn no_predictions_scores_zero() {
        let s = detector_eval(&labels(&[], 3, LabelSource::Predicted), &labels(&[0], 3, LabelSource::Gold))
            .unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn coverage_mismatch_lists_ids() {
        let err = detector_eval(&labels(&[], 2, LabelSource::Predicted), &labels(&[], 3, LabelSource::Gold))
            .unwrap_err();
        assert!(err.to_string().contains("u2"), "{err}");
    }
}
