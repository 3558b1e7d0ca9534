use super::config::DetectorConfig;
use super::model::WindowScorer;
use super::window::build_windows;
use crate::corpus::{DecisionLabel, DecisionTag, LabelSource, Meeting};
use crate::error::{Error, Result};

/// One predicted label per utterance, in utterance order.
///
/// Windows slide with stride 1 regardless of the training stride so every
/// utterance is a target exactly once.
pub fn predict_tags(
    meeting: &Meeting,
    scorer: &dyn WindowScorer,
    config: &DetectorConfig,
) -> Result<Vec<DecisionLabel>> {
    if scorer.window_size() != config.window_size || scorer.mode() != config.mode {
        return Err(Error::contract(format!(
            "model expects w = {} in {} mode, config asks for w = {} in {} mode",
            scorer.window_size(),
            scorer.mode(),
            config.window_size,
            config.mode
        )));
    }
    let windows = build_windows(meeting, None, config.window_size, 1)?;
    let mut labels = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(config.batch_size.max(1)) {
        let probs = scorer.score_windows(chunk)?;
        if probs.len() != chunk.len() {
            return Err(Error::contract(format!(
                "scorer returned {} scores for {} windows",
                probs.len(),
                chunk.len()
            )));
        }
        for (w, p) in chunk.iter().zip(probs) {
            labels.push(DecisionLabel {
                utterance_id: w.target().utterance_id.clone().expect("target is never PAD"),
                tag: DecisionTag::from_bool(p >= config.threshold),
                source: LabelSource::Predicted,
            });
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{MeetingStatus, Utterance};
    use crate::detector::{ConstantScorer, DetectorMode};

    fn meeting(n: usize) -> Meeting {
        Meeting {
            id: "m".into(),
            title: String::new(),
            recorded_at: None,
            status: MeetingStatus::Uploaded,
            utterances: (0..n)
                .map(|i| Utterance {
                    id: format!("u_{i}"),
                    index: i,
                    speaker: "A".into(),
                    text: "x".into(),
                    start_time: None,
                    end_time: None,
                })
                .collect(),
        }
    }

    fn scorer(p: f64) -> ConstantScorer {
        ConstantScorer {
            window_size: 5,
            mode: DetectorMode::SequenceLabeling,
            probability: p,
        }
    }

    #[test]
    fn below_threshold_is_non_td() {
        let labels = predict_tags(&meeting(9), &scorer(0.2), &DetectorConfig::default()).unwrap();
        assert_eq!(labels.len(), 9);
        assert!(labels.iter().all(|l| l.tag == DecisionTag::NonTd));
        assert!(labels.iter().all(|l| l.source == LabelSource::Predicted));
        let ids: Vec<_> = labels.iter().map(|l| l.utterance_id.as_str()).collect();
        assert_eq!(ids[0], "u_0");
        assert_eq!(ids[8], "u_8");
    }

    #[test]
    fn threshold_is_inclusive() {
        let labels = predict_tags(&meeting(3), &scorer(0.5), &DetectorConfig::default()).unwrap();
        assert!(labels.iter().all(|l| l.tag == DecisionTag::Td));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let cfg = DetectorConfig {
            window_size: 3,
            ..DetectorConfig::default()
        };
        assert!(matches!(predict_tags(&meeting(3), &scorer(0.1), &cfg), Err(Error::Contract(_))));
        let cfg = DetectorConfig {
            mode: DetectorMode::SentenceClassification,
            ..DetectorConfig::default()
        };
        assert!(matches!(predict_tags(&meeting(3), &scorer(0.1), &cfg), Err(Error::Contract(_))));
    }
}
