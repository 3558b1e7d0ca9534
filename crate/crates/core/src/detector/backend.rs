use candle_core::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Ctx, EncoderConfig, ParamBuilder, Params, TransformerEncoder};
use crate::text::Vocab;

/// A contextual encoder with its tokenizer.
///
/// Implementations must be deterministic in evaluation mode for fixed weights
/// and input.
pub trait EncoderBackend: Send + Sync {
    /// Backend kind, recorded in model metadata.
    fn kind(&self) -> &'static str;
    fn vocab(&self) -> &Vocab;
    fn hidden_size(&self) -> usize;
    fn max_len(&self) -> usize;
    /// `ids`, `segments`: `[B, T]` u32; `mask`: `[B, T]` f32 → `[B, T, hidden]`.
    fn encode(&self, ids: &Tensor, segments: &Tensor, mask: &Tensor, ctx: &mut Ctx) -> Result<Tensor>;
    fn params(&self) -> &Params;
    /// Backend settings needed to rebuild it from a checkpoint.
    fn settings(&self) -> serde_json::Value;
}

/// Stored form of a [`TransformerBackend`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformerSettings {
    pub encoder: EncoderConfig,
}

/// From-scratch transformer encoder over a word-level vocabulary.
pub struct TransformerBackend {
    vocab: Vocab,
    encoder: TransformerEncoder,
    params: Params,
}

impl TransformerBackend {
    pub const KIND: &'static str = "transformer";

    pub fn new(vocab: Vocab, cfg: EncoderConfig, seed: u64) -> Result<Self> {
        if cfg.vocab_size != vocab.len() {
            return Err(Error::Setup(format!(
                "encoder vocab_size {} differs from vocabulary size {}",
                cfg.vocab_size,
                vocab.len()
            )));
        }
        let mut pb = ParamBuilder::new(seed);
        let encoder = TransformerEncoder::new(&mut pb, "encoder", cfg)?;
        Ok(TransformerBackend {
            vocab,
            encoder,
            params: pb.finish(),
        })
    }

    pub fn load(vocab: Vocab, settings: &serde_json::Value, weights: &Path) -> Result<Self> {
        let settings: TransformerSettings = serde_json::from_value(settings.clone())?;
        let backend = TransformerBackend::new(vocab, settings.encoder, 0)?;
        backend.params.load(weights)?;
        Ok(backend)
    }
}

impl EncoderBackend for TransformerBackend {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn hidden_size(&self) -> usize {
        self.encoder.config().hidden
    }

    fn max_len(&self) -> usize {
        self.encoder.config().max_len
    }

    fn encode(&self, ids: &Tensor, segments: &Tensor, mask: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        self.encoder.forward(ids, segments, mask, ctx)
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn settings(&self) -> serde_json::Value {
        serde_json::to_value(TransformerSettings {
            encoder: self.encoder.config().clone(),
        })
        .expect("settings serialize")
    }
}
