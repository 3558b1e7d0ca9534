use chrono::Utc;

use super::config::RewriterConfig;
use super::context::assemble_context;
use super::input::assemble_rewriter_input;
use super::model::Seq2SeqBackend;
use crate::corpus::{DecisionItem, DecisionLabel, Meeting, ModelVersions};
use crate::error::{Error, Result};

/// Rewrites one TD-tagged utterance into a [`DecisionItem`].
///
/// An empty decode falls back to the original text with `degraded` set.
/// `model_versions.detector` is left empty for the caller to fill.
pub fn rewrite(
    meeting: &Meeting,
    label: &DecisionLabel,
    model: &dyn Seq2SeqBackend,
    config: &RewriterConfig,
) -> Result<DecisionItem> {
    config.validate()?;
    if !label.tag.is_decision() {
        return Err(Error::contract(format!(
            "utterance {} is not tagged as a decision",
            label.utterance_id
        )));
    }
    let utt = meeting.utterance(&label.utterance_id).ok_or_else(|| {
        Error::NotFound(format!("utterance {} in meeting {}", label.utterance_id, meeting.id))
    })?;
    let vocab = model.vocab();
    let context = if config.speaker_prefix {
        let prefixed: Vec<String> = meeting.utterances[..utt.index]
            .iter()
            .map(|u| format!("{}: {}", u.speaker, u.text))
            .collect();
        let refs: Vec<&str> = prefixed.iter().map(String::as_str).collect();
        super::context::select_context(&refs, config.context_budget_tokens, vocab)?
    } else {
        assemble_context(meeting, utt.index, config.context_budget_tokens, vocab)?
    };
    let input = assemble_rewriter_input(&context, &utt.text, vocab)?;
    let ids = model.generate(&input, config.beam_width, config.max_output_tokens)?;
    let text = vocab.decode(&ids, true).trim().to_owned();
    let degraded = text.is_empty();
    if degraded {
        tracing::warn!(utterance = %utt.id, "empty rewrite, keeping original text");
    }
    Ok(DecisionItem {
        id: format!("{}:{}", meeting.id, utt.id),
        meeting_id: meeting.id.clone(),
        utterance_id: utt.id.clone(),
        utterance_index: utt.index,
        original_text: utt.text.clone(),
        rewritten_text: if degraded { utt.text.clone() } else { text },
        degraded,
        context_tokens: input.context_token_count(),
        created_at: Utc::now(),
        model_versions: ModelVersions {
            detector: String::new(),
            rewriter: model.version(),
        },
    })
}
