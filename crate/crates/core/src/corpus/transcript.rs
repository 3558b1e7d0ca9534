use chrono::{DateTime, Utc};
use serde::Deserialize;
use std::io::BufRead;

use super::types::{DecisionLabel, DecisionTag, LabelSource, Meeting, MeetingStatus, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranscriptFormat {
    #[default]
    Jsonl,
}

/// Caller-supplied meeting attributes that are not part of the transcript body.
#[derive(Debug, Clone, Default)]
pub struct MeetingMeta {
    pub id: String,
    pub title: String,
    pub recorded_at: Option<DateTime<Utc>>,
}

impl MeetingMeta {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        MeetingMeta {
            title: id.clone(),
            id,
            recorded_at: None,
        }
    }
}

#[derive(Deserialize)]
struct TranscriptLine {
    #[serde(default)]
    id: Option<String>,
    speaker: String,
    text: String,
    #[serde(default)]
    start: Option<f64>,
    #[serde(default)]
    end: Option<f64>,
}

/// Parses a JSON Lines transcript. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn parse_transcript<R: BufRead>(
    reader: R,
    format: TranscriptFormat,
    meta: MeetingMeta,
) -> Result<Meeting> {
    let TranscriptFormat::Jsonl = format;
    let mut utterances = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TranscriptLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let index = utterances.len();
        utterances.push(Utterance {
            id: rec.id.unwrap_or_else(|| format!("u_{index}")),
            index,
            speaker: rec.speaker,
            text: rec.text,
            start_time: rec.start,
            end_time: rec.end,
        });
    }
    if utterances.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let meeting = Meeting {
        id: meta.id,
        title: meta.title,
        recorded_at: meta.recorded_at,
        utterances,
        status: MeetingStatus::Uploaded,
    };
    meeting.validate()?;
    Ok(meeting)
}

#[derive(Deserialize)]
struct LabelLine {
    utterance_index: usize,
    tag: DecisionTag,
}

/// Reads a gold label file (`{"utterance_index": int, "tag": "TD"|"NON_TD"}` per line).
///
/// Utterances without a line default to `NON_TD`, so the result always covers
/// the whole meeting in utterance order.
pub fn parse_labels<R: BufRead>(reader: R, meeting: &Meeting) -> Result<Vec<DecisionLabel>> {
    let mut tags = vec![DecisionTag::NonTd; meeting.len()];
    let mut seen = vec![false; meeting.len()];
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if rec.utterance_index >= meeting.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "utterance_index {} outside meeting {} of {} utterances",
                    rec.utterance_index,
                    meeting.id,
                    meeting.len()
                ),
            });
        }
        if std::mem::replace(&mut seen[rec.utterance_index], true) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("utterance_index {} labeled twice", rec.utterance_index),
            });
        }
        tags[rec.utterance_index] = rec.tag;
    }
    Ok(meeting
        .utterances
        .iter()
        .zip(tags)
        .map(|(u, tag)| DecisionLabel {
            utterance_id: u.id.clone(),
            tag,
            source: LabelSource::Gold,
        })
        .collect())
}

/// Serializes labels in the label-file format, one line per utterance.
pub fn write_labels(meeting: &Meeting, labels: &[DecisionLabel]) -> Result<String> {
    let mut out = String::new();
    for label in labels {
        let u = meeting
            .utterance(&label.utterance_id)
            .ok_or_else(|| Error::NotFound(format!("utterance {}", label.utterance_id)))?;
        out.push_str(&serde_json::to_string(&serde_json::json!({
            "utterance_index": u.index,
            "tag": label.tag,
        }))?);
        out.push('\n');
    }
    Ok(out)
}

/// Serializes a meeting back into transcript JSONL.
pub fn write_transcript(meeting: &Meeting) -> Result<String> {
    let mut out = String::new();
    for u in &meeting.utterances {
        let mut obj = serde_json::json!({ "id": u.id, "speaker": u.speaker, "text": u.text });
        if let Some(s) = u.start_time {
            obj["start"] = s.into();
        }
        if let Some(e) = u.end_time {
            obj["end"] = e.into();
        }
        out.push_str(&serde_json::to_string(&obj)?);
        out.push('\n');
    }
    Ok(out)
}
