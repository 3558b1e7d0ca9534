use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// A single transcribed turn. Text is verbatim, fillers included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub index: usize,
    pub speaker: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeetingStatus {
    Uploaded,
    Processed,
    Failed,
}

impl MeetingStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MeetingStatus::Uploaded => "uploaded",
            MeetingStatus::Processed => "processed",
            MeetingStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uploaded" => Some(MeetingStatus::Uploaded),
            "processed" => Some(MeetingStatus::Processed),
            "failed" => Some(MeetingStatus::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meeting {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded_at: Option<DateTime<Utc>>,
    pub utterances: Vec<Utterance>,
    pub status: MeetingStatus,
}

impl Meeting {
    /// Checks that indices are exactly `0..n` in order and ids are unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.utterances.len());
        for (pos, u) in self.utterances.iter().enumerate() {
            if u.index != pos {
                return Err(Error::Validation(format!(
                    "meeting {}: utterance at position {pos} has index {}",
                    self.id, u.index
                )));
            }
            if !seen.insert(u.id.as_str()) {
                return Err(Error::Validation(format!(
                    "meeting {}: duplicate utterance id {:?}",
                    self.id, u.id
                )));
            }
        }
        Ok(())
    }

    pub fn utterance(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }
}

/// Binary decision tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionTag {
    #[serde(rename = "TD")]
    Td,
    #[serde(rename = "NON_TD")]
    NonTd,
}

impl DecisionTag {
    pub fn is_decision(self) -> bool {
        self == DecisionTag::Td
    }

    pub fn from_bool(decision: bool) -> Self {
        if decision {
            DecisionTag::Td
        } else {
            DecisionTag::NonTd
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionTag::Td => "TD",
            DecisionTag::NonTd => "NON_TD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Gold,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLabel {
    pub utterance_id: String,
    pub tag: DecisionTag,
    pub source: LabelSource,
}

/// A meeting with one gold label per utterance, in utterance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMeeting {
    pub meeting: Meeting,
    pub labels: Vec<DecisionLabel>,
}

impl LabeledMeeting {
    /// Checks that labels cover every utterance exactly once, in order.
    pub fn validate(&self) -> Result<()> {
        self.meeting.validate()?;
        if self.labels.len() != self.meeting.len() {
            return Err(Error::Validation(format!(
                "meeting {} has {} utterances but {} labels",
                self.meeting.id,
                self.meeting.len(),
                self.labels.len()
            )));
        }
        for (u, l) in self.meeting.utterances.iter().zip(&self.labels) {
            if u.id != l.utterance_id {
                return Err(Error::Validation(format!(
                    "meeting {}: label for {} found where {} was expected",
                    self.meeting.id, l.utterance_id, u.id
                )));
            }
        }
        Ok(())
    }

    pub fn tags(&self) -> Vec<DecisionTag> {
        self.labels.iter().map(|l| l.tag).collect()
    }
}

/// Meeting-level partition. Never splits a meeting across sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Identifies which models produced an item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ModelVersions {
    pub detector: String,
    pub rewriter: String,
}

/// A rewritten decision utterance, the unit shown to reviewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionItem {
    pub id: String,
    pub meeting_id: String,
    pub utterance_id: String,
    pub utterance_index: usize,
    pub original_text: String,
    pub rewritten_text: String,
    pub degraded: bool,
    pub context_tokens: usize,
    pub created_at: DateTime<Utc>,
    pub model_versions: ModelVersions,
}
