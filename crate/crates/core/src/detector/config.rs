use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which head produces the target prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorMode {
    /// Sequence labeling: one prediction per `[SEP]`, trained on every slot.
    #[serde(rename = "SL")]
    SequenceLabeling,
    /// Sentence classification: the `[CLS]` vector predicts the target only.
    #[serde(rename = "SC")]
    SentenceClassification,
}

impl std::fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorMode::SequenceLabeling => "SL",
            DetectorMode::SentenceClassification => "SC",
        })
    }
}

/// Size of the from-scratch encoder backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSettings {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub dropout: f64,
    pub vocab_min_freq: usize,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            hidden: 64,
            heads: 4,
            layers: 2,
            ffn: 128,
            dropout: 0.1,
            vocab_min_freq: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub window_size: usize,
    pub stride: usize,
    pub mode: DetectorMode,
    pub epochs: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub head_hidden: Vec<usize>,
    pub output_classes: usize,
    pub threshold: f64,
    pub encoder_max_len: usize,
    /// Loss weight of the TD class; `None` uses the negative/positive ratio
    /// of the training targets.
    pub positive_weight: Option<f64>,
    pub seed: u64,
    pub encoder: EncoderSettings,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_size: 5,
            stride: 1,
            mode: DetectorMode::SequenceLabeling,
            epochs: 20,
            dropout: 0.2,
            batch_size: 16,
            learning_rate: 5e-5,
            weight_decay: 0.01,
            head_hidden: vec![512, 400],
            output_classes: 2,
            threshold: 0.5,
            encoder_max_len: 512,
            positive_weight: None,
            seed: 0,
            encoder: EncoderSettings::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_size < 2 {
            return bad(format!("window_size must be ≥ 2, got {}", self.window_size));
        }
        if self.stride < 1 {
            return bad("stride must be ≥ 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if self.output_classes != 2 {
            return bad(format!("the detector is binary; output_classes = {}", self.output_classes));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.encoder_max_len < self.window_size + 1 {
            return bad("encoder_max_len cannot hold the window markers".into());
        }
        if let Some(w) = self.positive_weight {
            if w.is_nan() || w <= 0.0 {
                return bad(format!("positive_weight must be positive, got {w}"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DetectorConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = DetectorConfig::default();
        c.validate().unwrap();
        assert_eq!((c.window_size, c.epochs, c.batch_size), (5, 20, 16));
        assert_eq!(c.head_hidden, vec![512, 400]);
        assert_eq!(c.learning_rate, 5e-5);
        assert_eq!(c.dropout, 0.2);
    }

    #[test]
    fn toml_overrides() {
        let c = DetectorConfig::from_toml("mode = \"SC\"\nwindow_size = 3\n[encoder]\nhidden = 32\n").unwrap();
        assert_eq!(c.mode, DetectorMode::SentenceClassification);
        assert_eq!(c.window_size, 3);
        assert_eq!(c.encoder.hidden, 32);
        assert_eq!(c.encoder.heads, 4);
    }

    #[test]
    fn rejects_invalid() {
        for text in ["window_size = 1", "stride = 0", "threshold = 1.0", "output_classes = 5"] {
            assert!(DetectorConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
