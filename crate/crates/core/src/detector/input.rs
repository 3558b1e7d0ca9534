use serde::{Deserialize, Serialize};

use super::window::Window;
use crate::error::{Error, Result};
use crate::text::{SpecialToken, Vocab};

/// Tokens removed to respect the encoder length limit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruncationRecord {
    /// Leading tokens of a context slot were dropped.
    Context { slot: usize, dropped: usize },
    /// Trailing tokens of the target utterance were dropped.
    Target { slot: usize, dropped: usize },
}

/// Encoder input `[CLS] u1 [SEP] u2 [SEP] … uw [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorInput {
    pub token_ids: Vec<u32>,
    /// Window slot of each token; `[CLS]` belongs to slot 0.
    pub segment_ids: Vec<u32>,
    /// Position of the `[SEP]` closing each slot.
    pub sep_positions: Vec<usize>,
    pub attention_mask: Vec<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncations: Vec<TruncationRecord>,
}

impl DetectorInput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Serializes a window for the encoder.
///
/// PAD slots contribute no tokens but keep their `[SEP]`. When content
/// exceeds `max_len`, context slots lose tokens from their start, oldest
/// slot first (the slot after the target counts as newest), and the target
/// loses tokens from its end only as a last resort.
pub fn assemble_detector_input(window: &Window, vocab: &Vocab, max_len: usize) -> Result<DetectorInput> {
    let cls = vocab.special(SpecialToken::Cls)?;
    let sep = vocab.special(SpecialToken::Sep)?;
    let w = window.size();
    if max_len < w + 1 {
        return Err(Error::config(format!(
            "encoder maximum {max_len} cannot hold [CLS] and {w} [SEP] tokens"
        )));
    }
    let mut content: Vec<Vec<u32>> = window
        .slots
        .iter()
        .map(|s| if s.is_pad() { Vec::new() } else { vocab.encode(&s.text) })
        .collect();

    let budget = max_len - w - 1;
    let mut excess = content.iter().map(Vec::len).sum::<usize>().saturating_sub(budget);
    let mut truncations = Vec::new();
    if excess > 0 {
        let target = window.target_pos;
        let order = (0..w).filter(|&i| i != target).chain(std::iter::once(target));
        for slot in order {
            if excess == 0 {
                break;
            }
            let cut = excess.min(content[slot].len());
            if cut == 0 {
                continue;
            }
            if slot == target {
                let keep = content[slot].len() - cut;
                content[slot].truncate(keep);
                tracing::warn!(window = %window.window_id, dropped = cut, "target utterance truncated");
                truncations.push(TruncationRecord::Target { slot, dropped: cut });
            } else {
                content[slot].drain(..cut);
                truncations.push(TruncationRecord::Context { slot, dropped: cut });
            }
            excess -= cut;
        }
    }

    let total = 1 + w + content.iter().map(Vec::len).sum::<usize>();
    let mut token_ids = Vec::with_capacity(total);
    let mut segment_ids = Vec::with_capacity(total);
    let mut sep_positions = Vec::with_capacity(w);
    token_ids.push(cls);
    segment_ids.push(0);
    for (slot, tokens) in content.iter().enumerate() {
        token_ids.extend_from_slice(tokens);
        token_ids.push(sep);
        segment_ids.extend(std::iter::repeat_n(slot as u32, tokens.len() + 1));
        sep_positions.push(token_ids.len() - 1);
    }
    Ok(DetectorInput {
        attention_mask: vec![1; token_ids.len()],
        token_ids,
        segment_ids,
        sep_positions,
        truncations,
    })
}
