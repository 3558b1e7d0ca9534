use candle_core::{Device, Module, Tensor, D};
use candle_nn::Linear;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::config::{RewriterConfig, RewriterMode, Seq2SeqSettings};
use super::input::{RewriteExample, RewriterInput};
use crate::error::{Error, Result};
use crate::nn::{
    attention_bias, length_mask, pad_u32, Ctx, EncoderConfig, ParamBuilder, Params, TransformerDecoder,
    TransformerEncoder,
};
use crate::text::{SpecialToken, Vocab};

const META_FILE: &str = "rewriter.json";
const VOCAB_FILE: &str = "vocab.json";
const WEIGHTS_FILE: &str = "weights.safetensors";

/// A sequence-to-sequence model that rewrites one assembled input.
///
/// `generate` must be deterministic for fixed weights, input and beam width.
pub trait Seq2SeqBackend: Send + Sync {
    fn kind(&self) -> &'static str;
    fn version(&self) -> String;
    fn vocab(&self) -> &Vocab;
    /// Beam search. Returns output ids without start or end markers.
    fn generate(&self, input: &RewriterInput, beam_width: usize, max_tokens: usize) -> Result<Vec<u32>>;
}

/// Returns the decision utterance's own tokens.
pub struct EchoBackend {
    pub vocab: Vocab,
}

impl Seq2SeqBackend for EchoBackend {
    fn kind(&self) -> &'static str {
        "echo"
    }

    fn version(&self) -> String {
        "echo-0".into()
    }

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn generate(&self, input: &RewriterInput, _beam_width: usize, max_tokens: usize) -> Result<Vec<u32>> {
        Ok(input
            .decision_positions
            .iter()
            .take(max_tokens)
            .map(|&p| input.token_ids[p])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriterMeta {
    pub format: u32,
    pub version: String,
    pub mode: RewriterMode,
    pub settings: Seq2SeqSettings,
    pub tokenizer: String,
}

/// Encoder states and everything the output layer needs from the source.
struct Encoded {
    states: Tensor,
    bias: Tensor,
    /// Additive copy-score bias `[B, S]`: padding mask plus picker log-odds
    /// on context positions.
    copy_bias: Tensor,
    /// Source tokens one-hot over the vocabulary `[B, S, V]`.
    source_onehot: Tensor,
    picker_logits: Option<Tensor>,
}

/// Per-batch training losses.
#[derive(Debug, Clone)]
pub struct LossParts {
    pub generation: Tensor,
    pub picker: Option<Tensor>,
}

/// Transformer encoder-decoder with a copy mechanism. In joint mode a picker
/// head scores context tokens from the shared encoder states, and its
/// log-probabilities bias which tokens the decoder copies.
pub struct PointerGenerator {
    vocab: Vocab,
    encoder: TransformerEncoder,
    decoder: TransformerDecoder,
    copy_query: Linear,
    gate: Linear,
    picker: Option<Linear>,
    params: Params,
    meta: RewriterMeta,
}

fn log_sigmoid(x: &Tensor) -> Result<Tensor> {
    // min(x, 0) − log(1 + e^{−|x|})
    let neg_abs = x.abs()?.neg()?;
    Ok((x.clamp(f32::MIN, 0f32)? - (neg_abs.exp()? + 1.0)?.log()?)?)
}

fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

impl PointerGenerator {
    pub fn new(vocab: Vocab, config: &RewriterConfig, mode: RewriterMode) -> Result<Self> {
        config.validate()?;
        for s in [SpecialToken::Pad, SpecialToken::X1, SpecialToken::X2, SpecialToken::Eos, SpecialToken::Bos] {
            vocab.special(s)?;
        }
        let s = &config.model;
        let cfg = EncoderConfig {
            vocab_size: vocab.len(),
            hidden: s.hidden,
            heads: s.heads,
            layers: s.encoder_layers,
            ffn: s.ffn,
            max_len: s.max_len,
            max_segments: 2,
            dropout: s.dropout,
        };
        let mut pb = ParamBuilder::new(config.seed);
        let encoder = TransformerEncoder::new(&mut pb, "encoder", cfg.clone())?;
        let decoder = TransformerDecoder::new(
            &mut pb,
            "decoder",
            cfg,
            encoder.token_embedding.clone(),
            s.decoder_layers,
        )?;
        let copy_query = pb.linear("copy.query", s.hidden, s.hidden)?;
        let gate = pb.linear("copy.gate", 2 * s.hidden, 1)?;
        let picker = match mode {
            RewriterMode::JointPickerWriter => Some(pb.linear("picker", s.hidden, 1)?),
            RewriterMode::WriterOnly => None,
        };
        let meta = RewriterMeta {
            format: 1,
            version: format!("rewriter-{mode}-{}", &uuid::Uuid::new_v4().simple().to_string()[..8]),
            mode,
            settings: s.clone(),
            tokenizer: vocab.identity(),
        };
        Ok(PointerGenerator {
            vocab,
            encoder,
            decoder,
            copy_query,
            gate,
            picker,
            params: pb.finish(),
            meta,
        })
    }

    pub fn meta(&self) -> &RewriterMeta {
        &self.meta
    }

    pub fn mode(&self) -> RewriterMode {
        self.meta.mode
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn device(&self) -> &Device {
        self.encoder.token_embedding.device()
    }

    fn special(&self, s: SpecialToken) -> u32 {
        self.vocab.special(s).expect("checked at construction")
    }

    fn encode(&self, inputs: &[&RewriterInput], ctx: &mut Ctx) -> Result<Encoded> {
        let dev = self.device().clone();
        let pad = self.special(SpecialToken::Pad);
        let ids: Vec<Vec<u32>> = inputs.iter().map(|i| i.token_ids.clone()).collect();
        let segs: Vec<Vec<u32>> = inputs.iter().map(|i| i.segment_ids.clone()).collect();
        let lens: Vec<usize> = ids.iter().map(Vec::len).collect();
        let ids_t = pad_u32(&ids, pad, &dev)?;
        let segs_t = pad_u32(&segs, 0, &dev)?;
        let mask = length_mask(&lens, &dev)?;
        let states = self.encoder.forward(&ids_t, &segs_t, &mask, ctx)?;
        let (b, s, _) = states.dims3()?;
        let v = self.vocab.len();

        let mut onehot = vec![0f32; b * s * v];
        let mut ctx_mask = vec![0f32; b * s];
        for (bi, inp) in inputs.iter().enumerate() {
            for (si, &tok) in inp.token_ids.iter().enumerate() {
                onehot[(bi * s + si) * v + tok as usize] = 1.0;
            }
            for &p in &inp.context_positions {
                ctx_mask[bi * s + p] = 1.0;
            }
        }
        let source_onehot = Tensor::from_vec(onehot, (b, s, v), &dev)?;
        let mut copy_bias = ((&mask - 1.0)? * 1e9)?;
        let picker_logits = match &self.picker {
            Some(head) => {
                let logits = head.forward(&states)?.squeeze(D::Minus1)?;
                let ctx_mask = Tensor::from_vec(ctx_mask, (b, s), &dev)?;
                copy_bias = (copy_bias + (log_sigmoid(&logits)? * ctx_mask)?)?;
                Some(logits)
            }
            None => None,
        };
        Ok(Encoded {
            states,
            bias: attention_bias(&mask)?,
            copy_bias,
            source_onehot,
            picker_logits,
        })
    }

    /// Mixture of vocabulary and copy distributions, `[B, T, V]`.
    fn output_probs(&self, hidden: &Tensor, enc: &Encoded) -> Result<Tensor> {
        let (b, t, d) = hidden.dims3()?;
        let v = self.vocab.len();
        let logits = hidden
            .reshape((b * t, d))?
            .matmul(&self.encoder.token_embedding.t()?)?
            .reshape((b, t, v))?;
        let p_vocab = candle_nn::ops::softmax(&logits, D::Minus1)?;
        let q = self.copy_query.forward(hidden)?;
        let scores = (q.matmul(&enc.states.t()?.contiguous()?)? / (d as f64).sqrt())?
            .broadcast_add(&enc.copy_bias.unsqueeze(1)?)?;
        let attn = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let p_copy = attn.matmul(&enc.source_onehot)?;
        let context = attn.matmul(&enc.states)?;
        let g = sigmoid(&self.gate.forward(&Tensor::cat(&[hidden, &context], D::Minus1)?)?)?;
        Ok((p_vocab.broadcast_mul(&g)? + p_copy.broadcast_mul(&(1.0 - &g)?)?)?)
    }

    /// Teacher-forced generation loss and, in joint mode, the picker loss.
    pub fn losses(&self, batch: &[&RewriteExample], ctx: &mut Ctx) -> Result<LossParts> {
        if batch.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        let dev = self.device().clone();
        let bos = self.special(SpecialToken::Bos);
        let eos = self.special(SpecialToken::Eos);
        let pad = self.special(SpecialToken::Pad);
        let max_t = self.decoder.max_len();
        let inputs: Vec<&RewriterInput> = batch.iter().map(|e| &e.input).collect();
        let enc = self.encode(&inputs, ctx)?;

        let mut dec_in = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for e in batch {
            let mut tgt = e.target_ids.clone();
            tgt.truncate(max_t - 1);
            let mut x = vec![bos];
            x.extend(&tgt);
            tgt.push(eos);
            dec_in.push(x);
            labels.push(tgt);
        }
        let lens: Vec<usize> = labels.iter().map(Vec::len).collect();
        let dec_ids = pad_u32(&dec_in, pad, &dev)?;
        let label_t = pad_u32(&labels, pad, &dev)?;
        let tmask = length_mask(&lens, &dev)?;
        let hidden = self.decoder.forward(&dec_ids, &enc.states, &enc.bias, ctx)?;
        let probs = self.output_probs(&hidden, &enc)?;
        let picked = probs.gather(&label_t.unsqueeze(D::Minus1)?, D::Minus1)?.squeeze(D::Minus1)?;
        let nll = (picked + 1e-9)?.log()?.neg()?;
        let n_tokens: usize = lens.iter().sum();
        let generation = ((nll * &tmask)?.sum_all()? / n_tokens as f64)?;

        let picker = match &enc.picker_logits {
            Some(logits) => {
                let (b, s) = logits.dims2()?;
                let mut target = vec![0f32; b * s];
                let mut weight = vec![0f32; b * s];
                for (bi, e) in batch.iter().enumerate() {
                    for (&p, &y) in e.input.context_positions.iter().zip(&e.picker_labels) {
                        target[bi * s + p] = y as f32;
                        weight[bi * s + p] = 1.0;
                    }
                }
                let count: f32 = weight.iter().sum();
                let target = Tensor::from_vec(target, (b, s), &dev)?;
                let weight = Tensor::from_vec(weight, (b, s), &dev)?;
                // BCE with logits: −y·log σ(x) − (1−y)·log σ(−x)
                let per = ((log_sigmoid(logits)? * &target)? + (log_sigmoid(&logits.neg()?)? * (1.0 - &target)?)?)?
                    .neg()?;
                Some(((per * weight)?.sum_all()? / count.max(1.0) as f64)?)
            }
            None => None,
        };
        Ok(LossParts { generation, picker })
    }

    /// Picker probabilities for each context token of `input`.
    pub fn picker_probabilities(&self, input: &RewriterInput) -> Result<Option<Vec<f32>>> {
        let enc = self.encode(&[input], &mut Ctx::eval())?;
        let Some(logits) = enc.picker_logits else {
            return Ok(None);
        };
        let row = sigmoid(&logits)?.squeeze(0)?.to_vec1::<f32>()?;
        Ok(Some(input.context_positions.iter().map(|&p| row[p]).collect()))
    }

    /// Length-normalized beam search. Ties break toward the lexicographically
    /// smaller id sequence.
    pub fn beam_search(&self, input: &RewriterInput, beam_width: usize, max_tokens: usize) -> Result<Vec<u32>> {
        if beam_width == 0 {
            return Err(Error::config("beam_width must be ≥ 1"));
        }
        let bos = self.special(SpecialToken::Bos);
        let eos = self.special(SpecialToken::Eos);
        let banned: Vec<u32> = [
            SpecialToken::Pad,
            SpecialToken::Bos,
            SpecialToken::Cls,
            SpecialToken::Sep,
            SpecialToken::X1,
            SpecialToken::X2,
        ]
        .iter()
        .filter_map(|&s| self.vocab.special(s).ok())
        .collect();
        let max_tokens = max_tokens.min(self.decoder.max_len() - 1);
        let enc = self.encode(&[input], &mut Ctx::eval())?;
        let (_, s, d) = enc.states.dims3()?;
        let v = self.vocab.len();

        let mut beams: Vec<(Vec<u32>, f64)> = vec![(vec![bos], 0.0)];
        let mut finished: Vec<(Vec<u32>, f64)> = Vec::new();
        for step in 0..=max_tokens {
            let k = beams.len();
            let expanded = Encoded {
                states: enc.states.broadcast_as((k, s, d))?.contiguous()?,
                bias: enc.bias.broadcast_as((k, 1, 1, s))?.contiguous()?,
                copy_bias: enc.copy_bias.broadcast_as((k, s))?.contiguous()?,
                source_onehot: enc.source_onehot.broadcast_as((k, s, v))?.contiguous()?,
                picker_logits: None,
            };
            let rows: Vec<Vec<u32>> = beams.iter().map(|(t, _)| t.clone()).collect();
            let ids = pad_u32(&rows, 0, self.device())?;
            let hidden = self
                .decoder
                .forward(&ids, &expanded.states, &expanded.bias, &mut Ctx::eval())?;
            let last = hidden.narrow(1, step, 1)?;
            let probs = self.output_probs(&last, &expanded)?.squeeze(1)?.to_vec2::<f32>()?;

            let mut candidates: Vec<(f64, usize, u32)> = Vec::with_capacity(k * v);
            for (bi, row) in probs.iter().enumerate() {
                for (tok, &p) in row.iter().enumerate() {
                    let tok = tok as u32;
                    if banned.contains(&tok) || p <= 0.0 {
                        continue;
                    }
                    // Out of budget: only the end marker may follow.
                    if step == max_tokens && tok != eos {
                        continue;
                    }
                    candidates.push((beams[bi].1 + (p as f64).ln(), bi, tok));
                }
            }
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next = Vec::with_capacity(beam_width);
            for (score, bi, tok) in candidates.into_iter().take(beam_width) {
                let mut seq = beams[bi].0.clone();
                if tok == eos {
                    let len = seq.len();
                    finished.push((seq.split_off(1), score / len as f64));
                } else {
                    seq.push(tok);
                    next.push((seq, score));
                }
            }
            if finished.len() >= beam_width || next.is_empty() {
                break;
            }
            beams = next;
        }
        if finished.is_empty() {
            finished = beams
                .into_iter()
                .map(|(mut seq, score)| {
                    let len = seq.len();
                    (seq.split_off(1), score / len as f64)
                })
                .collect();
        }
        finished.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(finished.into_iter().next().map(|(seq, _)| seq).unwrap_or_default())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_vec_pretty(&self.meta)?)
            .map_err(|e| Error::file(&meta_path, e))?;
        self.vocab.save(&dir.join(VOCAB_FILE))?;
        self.params.save(&dir.join(WEIGHTS_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let raw = std::fs::read(&meta_path).map_err(|e| Error::file(&meta_path, e))?;
        let meta: RewriterMeta = serde_json::from_slice(&raw)?;
        let vocab = Vocab::load(&dir.join(VOCAB_FILE))?;
        if vocab.identity() != meta.tokenizer {
            return Err(Error::Setup(format!(
                "{}: vocabulary {} does not match recorded tokenizer {}",
                dir.display(),
                vocab.identity(),
                meta.tokenizer
            )));
        }
        let config = RewriterConfig {
            model: meta.settings.clone(),
            context_budget_tokens: 1,
            ..RewriterConfig::default()
        };
        let mut model = PointerGenerator::new(vocab, &config, meta.mode)?;
        model.params.load(&dir.join(WEIGHTS_FILE))?;
        model.meta = meta;
        Ok(model)
    }

    /// Deep copy of the weights.
    pub(crate) fn snapshot(&self) -> Result<Vec<Tensor>> {
        self.params.snapshot()
    }

    pub(crate) fn restore(&self, snapshot: &[Tensor]) -> Result<()> {
        self.params.restore(snapshot)
    }
}

impl Seq2SeqBackend for PointerGenerator {
    fn kind(&self) -> &'static str {
        "pointer-generator"
    }

    fn version(&self) -> String {
        self.meta.version.clone()
    }

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn generate(&self, input: &RewriterInput, beam_width: usize, max_tokens: usize) -> Result<Vec<u32>> {
        self.beam_search(input, beam_width, max_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;
    use crate::rewriter::input::assemble_rewriter_input;

    fn tiny() -> (Vocab, RewriterConfig) {
        let vocab = Vocab::build("t", ["we will check the report at sapporo there ok"], 1, true);
        let config = RewriterConfig {
            context_budget_tokens: 20,
            model: Seq2SeqSettings {
                hidden: 16,
                heads: 2,
                encoder_layers: 1,
                decoder_layers: 1,
                ffn: 32,
                max_len: 32,
                ..Default::default()
            },
            ..Default::default()
        };
        (vocab, config)
    }

    fn example(vocab: &Vocab) -> RewriteExample {
        RewriteExample::new(
            "e",
            &["the report at sapporo".into()],
            "ok we will check there",
            "we will check the report at sapporo",
            20,
            vocab,
        )
        .unwrap()
    }

    #[test]
    fn losses_are_finite_and_mode_dependent() {
        let (vocab, config) = tiny();
        let ex = example(&vocab);
        let joint = PointerGenerator::new(vocab.clone(), &config, RewriterMode::JointPickerWriter).unwrap();
        let parts = joint.losses(&[&ex, &ex], &mut Ctx::eval()).unwrap();
        assert!(parts.generation.to_scalar::<f32>().unwrap().is_finite());
        assert!(parts.picker.unwrap().to_scalar::<f32>().unwrap() > 0.0);
        let writer = PointerGenerator::new(vocab, &config, RewriterMode::WriterOnly).unwrap();
        assert!(writer.losses(&[&ex], &mut Ctx::eval()).unwrap().picker.is_none());
    }

    #[test]
    fn output_is_a_distribution() {
        let (vocab, config) = tiny();
        let m = PointerGenerator::new(vocab.clone(), &config, RewriterMode::JointPickerWriter).unwrap();
        let inp = assemble_rewriter_input(&["the report".into()], "check there", &vocab).unwrap();
        let enc = m.encode(&[&inp], &mut Ctx::eval()).unwrap();
        let h = Tensor::ones((1, 3, 16), DType::F32, &Device::Cpu).unwrap();
        let p = m.output_probs(&h, &enc).unwrap();
        for row in p.squeeze(0).unwrap().to_vec2::<f32>().unwrap() {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn beam_search_is_deterministic_and_bounded() {
        let (vocab, config) = tiny();
        let m = PointerGenerator::new(vocab.clone(), &config, RewriterMode::JointPickerWriter).unwrap();
        let inp = assemble_rewriter_input(&["the report".into()], "check there", &vocab).unwrap();
        let a = m.beam_search(&inp, 3, 6).unwrap();
        assert_eq!(a, m.beam_search(&inp, 3, 6).unwrap());
        assert!(a.len() <= 6);
        assert!(a.iter().all(|&t| t != vocab.special(SpecialToken::Eos).unwrap()));
    }

    #[test]
    fn save_load_round_trip() {
        let (vocab, config) = tiny();
        let m = PointerGenerator::new(vocab.clone(), &config, RewriterMode::WriterOnly).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = PointerGenerator::load(dir.path()).unwrap();
        assert_eq!(back.meta(), m.meta());
        let inp = assemble_rewriter_input(&[], "check there", &vocab).unwrap();
        assert_eq!(back.beam_search(&inp, 2, 5).unwrap(), m.beam_search(&inp, 2, 5).unwrap());
    }

    #[test]
    fn echo_returns_decision_tokens() {
        let (vocab, _) = tiny();
        let inp = assemble_rewriter_input(&["the report".into()], "check there", &vocab).unwrap();
        let out = EchoBackend { vocab: vocab.clone() }.generate(&inp, 5, 10).unwrap();
        assert_eq!(vocab.decode(&out, true), "check there");
    }
}
