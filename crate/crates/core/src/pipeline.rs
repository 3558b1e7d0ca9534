//! Detector-then-rewriter orchestration over whole meetings.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use chrono::Utc;

use crate::corpus::{DecisionItem, DecisionLabel, DecisionTag, LabelSource, Meeting, ModelVersions};
use crate::detector::{predict_tags, DetectorConfig, WindowScorer};
use crate::error::{Error, Result};
use crate::rewriter::{rewrite, RewriterConfig, Seq2SeqBackend};

/// Tags every utterance of a meeting.
pub trait TagPredictor: Send + Sync {
    fn version(&self) -> String;
    fn predict(&self, meeting: &Meeting) -> Result<Vec<DecisionLabel>>;
}

/// Rewrites one TD-tagged utterance.
pub trait UtteranceRewriter: Send + Sync {
    fn version(&self) -> String;
    fn rewrite(&self, meeting: &Meeting, label: &DecisionLabel) -> Result<DecisionItem>;
}

/// A trained window scorer with its inference settings.
pub struct DetectorPredictor {
    pub scorer: Box<dyn WindowScorer>,
    pub config: DetectorConfig,
}

impl TagPredictor for DetectorPredictor {
    fn version(&self) -> String {
        self.scorer.version()
    }

    fn predict(&self, meeting: &Meeting) -> Result<Vec<DecisionLabel>> {
        predict_tags(meeting, self.scorer.as_ref(), &self.config)
    }
}

/// A sequence-to-sequence backend with its decoding settings.
pub struct ModelRewriter {
    pub model: Box<dyn Seq2SeqBackend>,
    pub config: RewriterConfig,
}

impl UtteranceRewriter for ModelRewriter {
    fn version(&self) -> String {
        self.model.version()
    }

    fn rewrite(&self, meeting: &Meeting, label: &DecisionLabel) -> Result<DecisionItem> {
        rewrite(meeting, label, self.model.as_ref(), &self.config)
    }
}

/// Tags the utterances whose text contains any of the keywords.
#[derive(Debug, Clone)]
pub struct KeywordTagger {
    pub keywords: Vec<String>,
}

impl TagPredictor for KeywordTagger {
    fn version(&self) -> String {
        format!("keyword-{}", self.keywords.len())
    }

    fn predict(&self, meeting: &Meeting) -> Result<Vec<DecisionLabel>> {
        Ok(meeting
            .utterances
            .iter()
            .map(|u| DecisionLabel {
                utterance_id: u.id.clone(),
                tag: DecisionTag::from_bool(self.keywords.iter().any(|k| u.text.contains(k.as_str()))),
                source: LabelSource::Predicted,
            })
            .collect())
    }
}

/// Tags the utterances at fixed indices.
#[derive(Debug, Clone)]
pub struct IndexTagger {
    pub indices: HashSet<usize>,
}

impl TagPredictor for IndexTagger {
    fn version(&self) -> String {
        "index-stub".into()
    }

    fn predict(&self, meeting: &Meeting) -> Result<Vec<DecisionLabel>> {
        Ok(meeting
            .utterances
            .iter()
            .map(|u| DecisionLabel {
                utterance_id: u.id.clone(),
                tag: DecisionTag::from_bool(self.indices.contains(&u.index)),
                source: LabelSource::Predicted,
            })
            .collect())
    }
}

/// Copies the original text into the item, optionally prefixed.
#[derive(Debug, Clone, Default)]
pub struct CopyRewriter {
    pub prefix: String,
}

impl UtteranceRewriter for CopyRewriter {
    fn version(&self) -> String {
        "copy-stub".into()
    }

    fn rewrite(&self, meeting: &Meeting, label: &DecisionLabel) -> Result<DecisionItem> {
        let u = meeting
            .utterance(&label.utterance_id)
            .ok_or_else(|| Error::NotFound(format!("utterance {}", label.utterance_id)))?;
        Ok(DecisionItem {
            id: format!("{}:{}", meeting.id, u.id),
            meeting_id: meeting.id.clone(),
            utterance_id: u.id.clone(),
            utterance_index: u.index,
            original_text: u.text.clone(),
            rewritten_text: format!("{}{}", self.prefix, u.text),
            degraded: false,
            context_tokens: 0,
            created_at: Utc::now(),
            model_versions: ModelVersions {
                detector: String::new(),
                rewriter: self.version(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Detecting,
    Rewriting,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    pub labels: Vec<DecisionLabel>,
    pub items: Vec<DecisionItem>,
    pub detecting: Duration,
    pub rewriting: Duration,
}

/// Runs detection, then rewrites each TD utterance in index order.
///
/// A failed rewrite degrades that item to the original text instead of
/// failing the run. `on_stage` is called when each stage starts.
pub fn run_pipeline(
    meeting: &Meeting,
    detector: &dyn TagPredictor,
    rewriter: &dyn UtteranceRewriter,
    mut on_stage: impl FnMut(Stage),
) -> Result<PipelineOutput> {
    meeting.validate()?;
    on_stage(Stage::Detecting);
    let started = Instant::now();
    let labels = detector.predict(meeting)?;
    if labels.len() != meeting.len() {
        return Err(Error::contract(format!(
            "detector returned {} labels for {} utterances",
            labels.len(),
            meeting.len()
        )));
    }
    let detecting = started.elapsed();

    on_stage(Stage::Rewriting);
    let started = Instant::now();
    let versions = ModelVersions {
        detector: detector.version(),
        rewriter: rewriter.version(),
    };
    let mut items = Vec::new();
    for label in labels.iter().filter(|l| l.tag.is_decision()) {
        let u = meeting
            .utterance(&label.utterance_id)
            .ok_or_else(|| Error::contract(format!("detector labeled unknown utterance {}", label.utterance_id)))?;
        let mut item = match rewriter.rewrite(meeting, label) {
            Ok(item) if !item.rewritten_text.trim().is_empty() => item,
            Ok(item) => DecisionItem {
                rewritten_text: u.text.clone(),
                degraded: true,
                ..item
            },
            Err(e) => {
                tracing::warn!(utterance = %u.id, error = %e, "rewrite failed, keeping original text");
                DecisionItem {
                    id: format!("{}:{}", meeting.id, u.id),
                    meeting_id: meeting.id.clone(),
                    utterance_id: u.id.clone(),
                    utterance_index: u.index,
                    original_text: u.text.clone(),
                    rewritten_text: u.text.clone(),
                    degraded: true,
                    context_tokens: 0,
                    created_at: Utc::now(),
                    model_versions: versions.clone(),
                }
            }
        };
        item.model_versions = versions.clone();
        items.push(item);
    }
    items.sort_by_key(|i| i.utterance_index);
    Ok(PipelineOutput {
        labels,
        items,
        detecting,
        rewriting: started.elapsed(),
    })
}
