use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriterMode {
    /// Generation loss plus per-token picker loss on shared encoder states.
    #[serde(rename = "joint")]
    JointPickerWriter,
    /// Plain sequence-to-sequence baseline.
    WriterOnly,
}

impl RewriterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewriterMode::JointPickerWriter => "joint",
            RewriterMode::WriterOnly => "writer_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "joint" => Some(RewriterMode::JointPickerWriter),
            "writer_only" => Some(RewriterMode::WriterOnly),
            _ => None,
        }
    }
}

impl std::fmt::Display for RewriterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Size of the from-scratch encoder-decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seq2SeqSettings {
    pub hidden: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn: usize,
    pub dropout: f64,
    /// Longest source or target sequence, in tokens.
    pub max_len: usize,
    pub vocab_min_freq: usize,
}

impl Default for Seq2SeqSettings {
    fn default() -> Self {
        Seq2SeqSettings {
            hidden: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn: 128,
            dropout: 0.1,
            max_len: 512,
            vocab_min_freq: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriterConfig {
    pub context_budget_tokens: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beam_width: usize,
    pub picker_loss_weight: f64,
    pub max_output_tokens: usize,
    /// Prefix each utterance with `speaker:` in the source.
    pub speaker_prefix: bool,
    pub seed: u64,
    pub model: Seq2SeqSettings,
}

impl Default for RewriterConfig {
    fn default() -> Self {
        RewriterConfig {
            context_budget_tokens: 360,
            epochs: 70,
            batch_size: 6,
            learning_rate: 2e-5,
            weight_decay: 0.01,
            beam_width: 5,
            picker_loss_weight: 1.0,
            max_output_tokens: 64,
            speaker_prefix: false,
            seed: 0,
            model: Seq2SeqSettings::default(),
        }
    }
}

impl RewriterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.context_budget_tokens == 0 {
            return Err(Error::config("context_budget_tokens must be ≥ 1"));
        }
        if self.beam_width == 0 {
            return Err(Error::config("beam_width must be ≥ 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be ≥ 1"));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::config("max_output_tokens must be ≥ 1"));
        }
        if self.picker_loss_weight.is_nan() || self.picker_loss_weight < 0.0 {
            return Err(Error::config("picker_loss_weight must be ≥ 0"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be > 0"));
        }
        let m = &self.model;
        if m.hidden == 0 || m.heads == 0 || !m.hidden.is_multiple_of(m.heads) {
            return Err(Error::config(format!(
                "hidden size {} must be a positive multiple of heads {}",
                m.hidden, m.heads
            )));
        }
        // Source holds the budgeted context, markers, and the decision.
        if m.max_len <= self.context_budget_tokens + 2 {
            return Err(Error::config(format!(
                "model max_len {} leaves no room beyond the context budget {}",
                m.max_len, self.context_budget_tokens
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RewriterConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RewriterConfig::default();
        c.validate().unwrap();
        assert_eq!(c.context_budget_tokens, 360);
        assert_eq!(c.beam_width, 5);
    }

    #[test]
    fn rejects_zero_budget_and_beam() {
        let mut c = RewriterConfig { context_budget_tokens: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c.context_budget_tokens = 10;
        c.beam_width = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_partial() {
        let c = RewriterConfig::from_toml("epochs = 3\n[model]\nhidden = 32\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.model.hidden, 32);
        assert_eq!(c.model.heads, 4);
    }

    #[test]
    fn mode_names() {
        for m in [RewriterMode::JointPickerWriter, RewriterMode::WriterOnly] {
            assert_eq!(RewriterMode::parse(m.as_str()), Some(m));
        }
    }
}
