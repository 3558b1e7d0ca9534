use candle_core::{Device, Module, Tensor, D};
use candle_nn::Linear;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::backend::{EncoderBackend, TransformerBackend};
use super::config::{DetectorConfig, DetectorMode};
use super::input::{assemble_detector_input, DetectorInput};
use super::window::Window;
use crate::error::{Error, Result};
use crate::nn::{length_mask, pad_u32, Ctx, EncoderConfig, ParamBuilder, Params};
use crate::text::{SpecialToken, Vocab};

pub(crate) const META_FILE: &str = "detector.json";
const VOCAB_FILE: &str = "vocab.json";
const BACKEND_FILE: &str = "backend.safetensors";
const HEAD_FILE: &str = "head.safetensors";

/// Sidecar metadata stored next to detector weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorMeta {
    pub format: u32,
    pub version: String,
    pub backend: String,
    pub backend_settings: serde_json::Value,
    pub window_size: usize,
    pub mode: DetectorMode,
    pub threshold: f64,
    pub tokenizer: String,
    pub encoder_max_len: usize,
    pub head_hidden: Vec<usize>,
    pub head_dropout: f64,
}

/// Feed-forward classifier over encoder vectors.
struct MlpHead {
    layers: Vec<Linear>,
    dropout: f64,
}

impl MlpHead {
    fn new(pb: &mut ParamBuilder, input: usize, hidden: &[usize], classes: usize, dropout: f64) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(classes))
            .collect();
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| pb.linear(&format!("head.{i}"), d[0], d[1]))
            .collect::<Result<_>>()?;
        Ok(MlpHead { layers, dropout })
    }

    fn forward(&self, x: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let mut h = ctx.dropout(x, self.dropout)?;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i < last {
                h = ctx.dropout(&h.relu()?, self.dropout)?;
            }
        }
        Ok(h)
    }
}

/// Scores windows: probability that each window's target is TD.
pub trait WindowScorer: Send + Sync {
    fn window_size(&self) -> usize;
    fn mode(&self) -> DetectorMode;
    fn version(&self) -> String;
    fn score_windows(&self, windows: &[Window]) -> Result<Vec<f64>>;
}

/// Encoder backend plus an SL or SC head.
pub struct DetectorModel {
    backend: Box<dyn EncoderBackend>,
    head: MlpHead,
    head_params: Params,
    meta: DetectorMeta,
}

impl DetectorModel {
    /// Fresh model with a transformer backend sized by `config.encoder`.
    pub fn new(vocab: Vocab, config: &DetectorConfig) -> Result<Self> {
        config.validate()?;
        let enc = &config.encoder;
        let cfg = EncoderConfig {
            vocab_size: vocab.len(),
            hidden: enc.hidden,
            heads: enc.heads,
            layers: enc.layers,
            ffn: enc.ffn,
            max_len: config.encoder_max_len,
            max_segments: config.window_size,
            dropout: enc.dropout,
        };
        let backend = TransformerBackend::new(vocab, cfg, config.seed)?;
        DetectorModel::with_backend(Box::new(backend), config)
    }

    /// Attaches a fresh head to an existing backend.
    pub fn with_backend(backend: Box<dyn EncoderBackend>, config: &DetectorConfig) -> Result<Self> {
        config.validate()?;
        for s in [SpecialToken::Cls, SpecialToken::Sep, SpecialToken::Pad] {
            backend.vocab().special(s)?;
        }
        let mut pb = ParamBuilder::new(config.seed.wrapping_add(1));
        let head = MlpHead::new(
            &mut pb,
            backend.hidden_size(),
            &config.head_hidden,
            config.output_classes,
            config.dropout,
        )?;
        let meta = DetectorMeta {
            format: 1,
            version: format!("detector-{}-{}", config.mode, &uuid::Uuid::new_v4().simple().to_string()[..8]),
            backend: backend.kind().to_owned(),
            backend_settings: backend.settings(),
            window_size: config.window_size,
            mode: config.mode,
            threshold: config.threshold,
            tokenizer: backend.vocab().identity(),
            encoder_max_len: config.encoder_max_len.min(backend.max_len()),
            head_hidden: config.head_hidden.clone(),
            head_dropout: config.dropout,
        };
        Ok(DetectorModel {
            backend,
            head,
            head_params: pb.finish(),
            meta,
        })
    }

    pub fn meta(&self) -> &DetectorMeta {
        &self.meta
    }

    pub fn vocab(&self) -> &Vocab {
        self.backend.vocab()
    }

    pub fn trainable(&self) -> Vec<candle_core::Var> {
        let mut vars = self.backend.params().vars();
        vars.extend(self.head_params.vars());
        vars
    }

    pub(crate) fn snapshot(&self) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        Ok((self.backend.params().snapshot()?, self.head_params.snapshot()?))
    }

    pub(crate) fn restore(&self, snap: &(Vec<Tensor>, Vec<Tensor>)) -> Result<()> {
        self.backend.params().restore(&snap.0)?;
        self.head_params.restore(&snap.1)
    }

    pub fn assemble(&self, window: &Window) -> Result<DetectorInput> {
        if window.size() != self.meta.window_size {
            return Err(Error::contract(format!(
                "window of {} slots given to a detector trained with w = {}",
                window.size(),
                self.meta.window_size
            )));
        }
        assemble_detector_input(window, self.vocab(), self.meta.encoder_max_len)
    }

    /// Logits `[B·w, 2]` in SL mode, `[B, 2]` in SC mode.
    pub(crate) fn logits(&self, inputs: &[DetectorInput], ctx: &mut Ctx) -> Result<Tensor> {
        let dev = Device::Cpu;
        let pad = self.vocab().special(SpecialToken::Pad)?;
        let ids: Vec<Vec<u32>> = inputs.iter().map(|i| i.token_ids.clone()).collect();
        let segs: Vec<Vec<u32>> = inputs.iter().map(|i| i.segment_ids.clone()).collect();
        let lengths: Vec<usize> = inputs.iter().map(DetectorInput::len).collect();
        let ids = pad_u32(&ids, pad, &dev)?;
        let segs = pad_u32(&segs, 0, &dev)?;
        let mask = length_mask(&lengths, &dev)?;
        let hidden = self.backend.encode(&ids, &segs, &mask, ctx)?;
        let (b, t, d) = hidden.dims3()?;
        let features = match self.meta.mode {
            DetectorMode::SequenceLabeling => {
                let idx: Vec<u32> = inputs
                    .iter()
                    .enumerate()
                    .flat_map(|(row, inp)| inp.sep_positions.iter().map(move |p| (row * t + p) as u32))
                    .collect();
                let idx = Tensor::from_vec(idx, inputs.len() * self.meta.window_size, &dev)?;
                hidden.reshape((b * t, d))?.index_select(&idx, 0)?
            }
            DetectorMode::SentenceClassification => hidden.narrow(1, 0, 1)?.squeeze(1)?,
        };
        self.head.forward(&features, ctx)
    }

    /// TD probability for each window's target utterance.
    pub fn target_probabilities(&self, windows: &[Window]) -> Result<Vec<f64>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let inputs = windows.iter().map(|w| self.assemble(w)).collect::<Result<Vec<_>>>()?;
        let logits = self.logits(&inputs, &mut Ctx::eval())?;
        let probs = candle_nn::ops::softmax(&logits, D::Minus1)?.to_vec2::<f32>()?;
        let w = self.meta.window_size;
        Ok(windows
            .iter()
            .enumerate()
            .map(|(i, win)| {
                let row = match self.meta.mode {
                    DetectorMode::SequenceLabeling => i * w + win.target_pos,
                    DetectorMode::SentenceClassification => i,
                };
                probs[row][1] as f64
            })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_vec_pretty(&self.meta)?)
            .map_err(|e| Error::file(&meta_path, e))?;
        self.vocab().save(&dir.join(VOCAB_FILE))?;
        self.backend.params().save(&dir.join(BACKEND_FILE))?;
        self.head_params.save(&dir.join(HEAD_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let raw = std::fs::read(&meta_path).map_err(|e| Error::file(&meta_path, e))?;
        let meta: DetectorMeta = serde_json::from_slice(&raw)?;
        let vocab = Vocab::load(&dir.join(VOCAB_FILE))?;
        if vocab.identity() != meta.tokenizer {
            return Err(Error::Setup(format!(
                "{}: vocabulary {} does not match recorded tokenizer {}",
                dir.display(),
                vocab.identity(),
                meta.tokenizer
            )));
        }
        let backend: Box<dyn EncoderBackend> = match meta.backend.as_str() {
            TransformerBackend::KIND => Box::new(TransformerBackend::load(
                vocab,
                &meta.backend_settings,
                &dir.join(BACKEND_FILE),
            )?),
            other => return Err(Error::Setup(format!("unknown encoder backend {other:?}"))),
        };
        let config = DetectorConfig {
            window_size: meta.window_size,
            mode: meta.mode,
            threshold: meta.threshold,
            head_hidden: meta.head_hidden.clone(),
            dropout: meta.head_dropout,
            encoder_max_len: meta.encoder_max_len,
            ..DetectorConfig::default()
        };
        let mut model = DetectorModel::with_backend(backend, &config)?;
        model.head_params.load(&dir.join(HEAD_FILE))?;
        model.meta = meta;
        Ok(model)
    }
}

impl WindowScorer for DetectorModel {
    fn window_size(&self) -> usize {
        self.meta.window_size
    }

    fn mode(&self) -> DetectorMode {
        self.meta.mode
    }

    fn version(&self) -> String {
        self.meta.version.clone()
    }

    fn score_windows(&self, windows: &[Window]) -> Result<Vec<f64>> {
        self.target_probabilities(windows)
    }
}

/// Scorer returning one fixed probability; for wiring tests.
#[derive(Debug, Clone)]
pub struct ConstantScorer {
    pub window_size: usize,
    pub mode: DetectorMode,
    pub probability: f64,
}

impl WindowScorer for ConstantScorer {
    fn window_size(&self) -> usize {
        self.window_size
    }

    fn mode(&self) -> DetectorMode {
        self.mode
    }

    fn version(&self) -> String {
        format!("constant-{}", self.probability)
    }

    fn score_windows(&self, windows: &[Window]) -> Result<Vec<f64>> {
        Ok(vec![self.probability; windows.len()])
    }
}
