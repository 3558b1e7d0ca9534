use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Detecting,
    Rewriting,
    Done,
    Failed,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Detecting => "detecting",
            JobState::Rewriting => "rewriting",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            JobState::Queued,
            JobState::Detecting,
            JobState::Rewriting,
            JobState::Done,
            JobState::Failed,
        ]
        .into_iter()
        .find(|j| j.as_str() == s)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// queued → detecting → rewriting → done, and any non-terminal → failed.
    pub fn can_transition(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Detecting) | (Detecting, Rewriting) | (Rewriting, Done) | (Queued | Detecting | Rewriting, Failed)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detecting_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewriting_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingJob {
    pub id: String,
    pub meeting_id: String,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timings: StageTimings,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl ProcessingJob {
    pub fn new(meeting_id: &str) -> Self {
        let now = Utc::now();
        ProcessingJob {
            id: uuid::Uuid::new_v4().to_string(),
            meeting_id: meeting_id.to_owned(),
            state: JobState::Queued,
            error: None,
            timings: StageTimings::default(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn advance(&mut self, next: JobState) -> Result<()> {
        if !self.state.can_transition(next) {
            return Err(Error::contract(format!(
                "job {}: illegal transition {} → {}",
                self.id,
                self.state.as_str(),
                next.as_str()
            )));
        }
        self.state = next;
        self.updated_at = Utc::now();
        Ok(())
    }

    pub fn fail(&mut self, reason: impl Into<String>) -> Result<()> {
        self.advance(JobState::Failed)?;
        self.error = Some(reason.into());
        Ok(())
    }
}
