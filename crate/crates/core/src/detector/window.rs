use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::corpus::{DecisionLabel, DecisionTag, Meeting};
use crate::error::{Error, Result};

/// One utterance position inside a window. PAD slots have no index and
/// empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSlot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_index: Option<usize>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<DecisionTag>,
}

impl WindowSlot {
    pub fn pad() -> Self {
        WindowSlot {
            utterance_id: None,
            utterance_index: None,
            text: String::new(),
            tag: None,
        }
    }

    pub fn is_pad(&self) -> bool {
        self.utterance_index.is_none()
    }
}

/// A run of `w` consecutive utterances whose second-to-last slot is the
/// prediction target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub window_id: String,
    pub meeting_id: String,
    pub target_pos: usize,
    pub slots: Vec<WindowSlot>,
    /// Pivot language when this window is a back-translated copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<String>,
    /// Window this copy was derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_window: Option<String>,
}

impl Window {
    pub fn size(&self) -> usize {
        self.slots.len()
    }

    pub fn target(&self) -> &WindowSlot {
        &self.slots[self.target_pos]
    }

    pub fn pad_mask(&self) -> Vec<bool> {
        self.slots.iter().map(WindowSlot::is_pad).collect()
    }

    pub fn target_tag(&self) -> Option<DecisionTag> {
        self.target().tag
    }

    pub fn is_positive(&self) -> bool {
        self.target_tag() == Some(DecisionTag::Td)
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.size();
        if w < 2 {
            return Err(Error::Validation(format!("window {} has {w} slots", self.window_id)));
        }
        if self.target_pos != w - 2 {
            return Err(Error::Validation(format!(
                "window {}: target at slot {}, expected {}",
                self.window_id,
                self.target_pos,
                w - 2
            )));
        }
        if self.target().is_pad() {
            return Err(Error::Validation(format!("window {}: target slot is PAD", self.window_id)));
        }
        // PADs only as a contiguous prefix or suffix.
        let mask = self.pad_mask();
        let first_real = mask.iter().position(|p| !p).unwrap_or(w);
        let last_real = mask.iter().rposition(|p| !p).unwrap_or(0);
        if mask[first_real..=last_real].iter().any(|p| *p) {
            return Err(Error::Validation(format!("window {}: PAD inside window", self.window_id)));
        }
        Ok(())
    }
}

pub(crate) fn check_window_size(w: usize) -> Result<()> {
    if w < 2 {
        return Err(Error::config(format!("window size must be ≥ 2, got {w}")));
    }
    Ok(())
}

/// Slides a window of `w` utterances over the meeting.
///
/// The window targeting utterance `t` holds `u[t-(w-2)] ..= u[t+1]`, padded
/// where indices leave `0..n`. Targets are `0, stride, 2·stride, …`, so stride
/// 1 yields exactly one window per utterance. Tags are attached where
/// `labels` mentions the utterance.
pub fn build_windows(
    meeting: &Meeting,
    labels: Option<&[DecisionLabel]>,
    w: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    check_window_size(w)?;
    if stride == 0 {
        return Err(Error::config("stride must be ≥ 1"));
    }
    if meeting.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    let tags: HashMap<&str, DecisionTag> = labels
        .unwrap_or_default()
        .iter()
        .map(|l| (l.utterance_id.as_str(), l.tag))
        .collect();
    let n = meeting.len() as isize;
    let back = (w - 2) as isize;
    let windows = (0..meeting.len())
        .step_by(stride)
        .map(|t| {
            let t = t as isize;
            let slots = (t - back..=t + 1)
                .map(|i| {
                    if i < 0 || i >= n {
                        return WindowSlot::pad();
                    }
                    let u = &meeting.utterances[i as usize];
                    WindowSlot {
                        utterance_id: Some(u.id.clone()),
                        utterance_index: Some(u.index),
                        text: u.text.clone(),
                        tag: tags.get(u.id.as_str()).copied(),
                    }
                })
                .collect();
            Window {
                window_id: format!("{}#{t}", meeting.id),
                meeting_id: meeting.id.clone(),
                target_pos: w - 2,
                slots,
                pivot: None,
                source_window: None,
            }
        })
        .collect();
    Ok(windows)
}
