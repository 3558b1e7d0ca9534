use candle_core::{Device, Module, Tensor, D};
use candle_nn::Linear;
use serde::{Deserialize, Serialize};

use super::params::{Ctx, ParamBuilder};
use crate::error::{Error, Result};

/// Layer normalization composed from differentiable primitives.
#[derive(Clone)]
pub struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
}

impl LayerNorm {
    pub fn new(weight: Tensor, bias: Tensor) -> Self {
        LayerNorm { weight, bias }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dim = x.dim(D::Minus1)? as f64;
        let mean = (x.sum_keepdim(D::Minus1)? / dim)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = (centered.sqr()?.sum_keepdim(D::Minus1)? / dim)?;
        let normed = centered.broadcast_div(&(var + 1e-5)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.weight)?.broadcast_add(&self.bias)?)
    }
}

/// Additive attention bias `[B, 1, 1, T]` from a `[B, T]` 0/1 key mask.
pub fn attention_bias(mask: &Tensor) -> Result<Tensor> {
    let (b, t) = mask.dims2()?;
    Ok(((mask - 1.0)? * 1e9)?.reshape((b, 1, 1, t))?)
}

/// Additive causal bias `[1, 1, T, T]`.
pub fn causal_bias(t: usize, device: &Device) -> Result<Tensor> {
    let data: Vec<f32> = (0..t)
        .flat_map(|i| (0..t).map(move |j| if j <= i { 0.0 } else { -1e9 }))
        .collect();
    Ok(Tensor::from_vec(data, (1, 1, t, t), device)?)
}

#[derive(Clone)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

impl Attention {
    pub fn new(pb: &mut ParamBuilder, name: &str, hidden: usize, heads: usize) -> Result<Self> {
        Ok(Attention {
            q: pb.linear(&format!("{name}.q"), hidden, hidden)?,
            k: pb.linear(&format!("{name}.k"), hidden, hidden)?,
            v: pb.linear(&format!("{name}.v"), hidden, hidden)?,
            o: pb.linear(&format!("{name}.o"), hidden, hidden)?,
            heads,
        })
    }

    fn split(&self, x: &Tensor) -> Result<Tensor> {
        let (b, t, d) = x.dims3()?;
        Ok(x.reshape((b, t, self.heads, d / self.heads))?
            .transpose(1, 2)?
            .contiguous()?)
    }

    /// `query [B, Tq, d]` attends over `memory [B, Tk, d]`.
    pub fn forward(
        &self,
        query: &Tensor,
        memory: &Tensor,
        bias: Option<&Tensor>,
        ctx: &mut Ctx,
        dropout: f64,
    ) -> Result<Tensor> {
        let (b, tq, d) = query.dims3()?;
        let q = self.split(&self.q.forward(query)?)?;
        let k = self.split(&self.k.forward(memory)?)?;
        let v = self.split(&self.v.forward(memory)?)?;
        let scale = 1.0 / ((d / self.heads) as f64).sqrt();
        let mut scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?;
        if let Some(bias) = bias {
            scores = scores.broadcast_add(bias)?;
        }
        let att = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let att = ctx.dropout(&att, dropout)?;
        let out = att.matmul(&v)?.transpose(1, 2)?.contiguous()?.reshape((b, tq, d))?;
        Ok(self.o.forward(&out)?)
    }
}

#[derive(Clone)]
pub struct FeedForward {
    up: Linear,
    down: Linear,
}

impl FeedForward {
    pub fn new(pb: &mut ParamBuilder, name: &str, hidden: usize, inner: usize) -> Result<Self> {
        Ok(FeedForward {
            up: pb.linear(&format!("{name}.up"), hidden, inner)?,
            down: pb.linear(&format!("{name}.down"), inner, hidden)?,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &mut Ctx, dropout: f64) -> Result<Tensor> {
        let h = self.up.forward(x)?.gelu()?;
        let h = ctx.dropout(&h, dropout)?;
        Ok(self.down.forward(&h)?)
    }
}

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub max_len: usize,
    pub max_segments: usize,
    pub dropout: f64,
}

impl EncoderConfig {
    pub fn small(vocab_size: usize, max_len: usize, max_segments: usize) -> Self {
        EncoderConfig {
            vocab_size,
            hidden: 64,
            heads: 4,
            layers: 2,
            ffn: 128,
            max_len,
            max_segments,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::config(format!(
                "hidden size {} must be a positive multiple of heads {}",
                self.hidden, self.heads
            )));
        }
        if self.vocab_size == 0 || self.max_len == 0 || self.max_segments == 0 {
            return Err(Error::config("vocab_size, max_len and max_segments must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct EncoderLayer {
    ln_attn: LayerNorm,
    attn: Attention,
    ln_ff: LayerNorm,
    ff: FeedForward,
}

impl EncoderLayer {
    pub fn new(pb: &mut ParamBuilder, name: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(EncoderLayer {
            ln_attn: pb.layer_norm(&format!("{name}.ln_attn"), cfg.hidden)?,
            attn: Attention::new(pb, &format!("{name}.attn"), cfg.hidden, cfg.heads)?,
            ln_ff: pb.layer_norm(&format!("{name}.ln_ff"), cfg.hidden)?,
            ff: FeedForward::new(pb, &format!("{name}.ff"), cfg.hidden, cfg.ffn)?,
        })
    }

    pub fn forward(&self, x: &Tensor, bias: &Tensor, ctx: &mut Ctx, p: f64) -> Result<Tensor> {
        let h = self.ln_attn.forward(x)?;
        let a = self.attn.forward(&h, &h, Some(bias), ctx, p)?;
        let x = (x + ctx.dropout(&a, p)?)?;
        let h = self.ln_ff.forward(&x)?;
        let f = self.ff.forward(&h, ctx, p)?;
        Ok((&x + ctx.dropout(&f, p)?)?)
    }
}

/// Pre-norm bidirectional encoder with token, position and segment embeddings.
#[derive(Clone)]
pub struct TransformerEncoder {
    pub(crate) token_embedding: Tensor,
    position_embedding: Tensor,
    segment_embedding: Tensor,
    layers: Vec<EncoderLayer>,
    ln_out: LayerNorm,
    cfg: EncoderConfig,
}

fn embed(table: &Tensor, ids: &Tensor) -> Result<Tensor> {
    let (b, t) = ids.dims2()?;
    let d = table.dim(1)?;
    Ok(table.index_select(&ids.flatten_all()?, 0)?.reshape((b, t, d))?)
}

fn positions(t: usize, device: &Device) -> Result<Tensor> {
    Ok(Tensor::arange(0u32, t as u32, device)?)
}

impl TransformerEncoder {
    pub fn new(pb: &mut ParamBuilder, name: &str, cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let token_embedding = pb.embedding(&format!("{name}.tok"), cfg.vocab_size, cfg.hidden)?;
        let position_embedding = pb.embedding(&format!("{name}.pos"), cfg.max_len, cfg.hidden)?;
        let segment_embedding = pb.embedding(&format!("{name}.seg"), cfg.max_segments, cfg.hidden)?;
        let layers = (0..cfg.layers)
            .map(|i| EncoderLayer::new(pb, &format!("{name}.layer{i}"), &cfg))
            .collect::<Result<_>>()?;
        let ln_out = pb.layer_norm(&format!("{name}.ln_out"), cfg.hidden)?;
        Ok(TransformerEncoder {
            token_embedding,
            position_embedding,
            segment_embedding,
            layers,
            ln_out,
            cfg,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    /// `ids`, `segments`: `[B, T]` u32; `mask`: `[B, T]` f32. Returns `[B, T, d]`.
    pub fn forward(&self, ids: &Tensor, segments: &Tensor, mask: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let (_, t) = ids.dims2()?;
        if t > self.cfg.max_len {
            return Err(Error::contract(format!(
                "input of {t} tokens exceeds encoder maximum {}",
                self.cfg.max_len
            )));
        }
        let pos = self.position_embedding.index_select(&positions(t, ids.device())?, 0)?;
        let x = embed(&self.token_embedding, ids)?
            .broadcast_add(&pos)?
            .add(&embed(&self.segment_embedding, segments)?)?;
        let mut x = ctx.dropout(&x, self.cfg.dropout)?;
        let bias = attention_bias(mask)?;
        for layer in &self.layers {
            x = layer.forward(&x, &bias, ctx, self.cfg.dropout)?;
        }
        self.ln_out.forward(&x)
    }
}

#[derive(Clone)]
pub struct DecoderLayer {
    ln_self: LayerNorm,
    self_attn: Attention,
    ln_cross: LayerNorm,
    cross_attn: Attention,
    ln_ff: LayerNorm,
    ff: FeedForward,
}

impl DecoderLayer {
    pub fn new(pb: &mut ParamBuilder, name: &str, cfg: &EncoderConfig) -> Result<Self> {
        Ok(DecoderLayer {
            ln_self: pb.layer_norm(&format!("{name}.ln_self"), cfg.hidden)?,
            self_attn: Attention::new(pb, &format!("{name}.self"), cfg.hidden, cfg.heads)?,
            ln_cross: pb.layer_norm(&format!("{name}.ln_cross"), cfg.hidden)?,
            cross_attn: Attention::new(pb, &format!("{name}.cross"), cfg.hidden, cfg.heads)?,
            ln_ff: pb.layer_norm(&format!("{name}.ln_ff"), cfg.hidden)?,
            ff: FeedForward::new(pb, &format!("{name}.ff"), cfg.hidden, cfg.ffn)?,
        })
    }

    fn forward(
        &self,
        x: &Tensor,
        memory: &Tensor,
        self_bias: &Tensor,
        memory_bias: &Tensor,
        ctx: &mut Ctx,
        p: f64,
    ) -> Result<Tensor> {
        let h = self.ln_self.forward(x)?;
        let a = self.self_attn.forward(&h, &h, Some(self_bias), ctx, p)?;
        let x = (x + ctx.dropout(&a, p)?)?;
        let h = self.ln_cross.forward(&x)?;
        let c = self.cross_attn.forward(&h, memory, Some(memory_bias), ctx, p)?;
        let x = (&x + ctx.dropout(&c, p)?)?;
        let h = self.ln_ff.forward(&x)?;
        let f = self.ff.forward(&h, ctx, p)?;
        Ok((&x + ctx.dropout(&f, p)?)?)
    }
}

/// Causal decoder with cross-attention. Shares its token embedding with an
/// encoder.
#[derive(Clone)]
pub struct TransformerDecoder {
    token_embedding: Tensor,
    position_embedding: Tensor,
    layers: Vec<DecoderLayer>,
    ln_out: LayerNorm,
    cfg: EncoderConfig,
}

impl TransformerDecoder {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        cfg: EncoderConfig,
        token_embedding: Tensor,
        layers: usize,
    ) -> Result<Self> {
        let position_embedding = pb.embedding(&format!("{name}.pos"), cfg.max_len, cfg.hidden)?;
        let layers = (0..layers)
            .map(|i| DecoderLayer::new(pb, &format!("{name}.layer{i}"), &cfg))
            .collect::<Result<_>>()?;
        let ln_out = pb.layer_norm(&format!("{name}.ln_out"), cfg.hidden)?;
        Ok(TransformerDecoder {
            token_embedding,
            position_embedding,
            layers,
            ln_out,
            cfg,
        })
    }

    pub fn max_len(&self) -> usize {
        self.cfg.max_len
    }

    /// `ids [B, T]`, `memory [B, S, d]`, `memory_bias [B, 1, 1, S]` → `[B, T, d]`.
    pub fn forward(
        &self,
        ids: &Tensor,
        memory: &Tensor,
        memory_bias: &Tensor,
        ctx: &mut Ctx,
    ) -> Result<Tensor> {
        let (_, t) = ids.dims2()?;
        if t > self.cfg.max_len {
            return Err(Error::contract(format!(
                "decoder input of {t} tokens exceeds maximum {}",
                self.cfg.max_len
            )));
        }
        let pos = self.position_embedding.index_select(&positions(t, ids.device())?, 0)?;
        let x = embed(&self.token_embedding, ids)?.broadcast_add(&pos)?;
        let mut x = ctx.dropout(&x, self.cfg.dropout)?;
        let self_bias = causal_bias(t, ids.device())?;
        for layer in &self.layers {
            x = layer.forward(&x, memory, &self_bias, memory_bias, ctx, self.cfg.dropout)?;
        }
        self.ln_out.forward(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    #[test]
    fn encoder_shapes_and_padding_invariance() {
        let mut pb = ParamBuilder::new(1);
        let enc = TransformerEncoder::new(&mut pb, "enc", EncoderConfig::small(20, 16, 4)).unwrap();
        let dev = Device::Cpu;
        let ids = Tensor::new(&[[3u32, 4, 5, 0, 0]], &dev).unwrap();
        let segs = Tensor::zeros((1, 5), DType::U32, &dev).unwrap();
        let mask = Tensor::new(&[[1f32, 1., 1., 0., 0.]], &dev).unwrap();
        let out = enc.forward(&ids, &segs, &mask, &mut Ctx::eval()).unwrap();
        assert_eq!(out.dims(), &[1, 5, 64]);

        let short = enc
            .forward(
                &Tensor::new(&[[3u32, 4, 5]], &dev).unwrap(),
                &Tensor::zeros((1, 3), DType::U32, &dev).unwrap(),
                &Tensor::ones((1, 3), DType::F32, &dev).unwrap(),
                &mut Ctx::eval(),
            )
            .unwrap();
        let a = out.narrow(1, 0, 3).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = short.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }

    #[test]
    fn decoder_is_causal() {
        let mut pb = ParamBuilder::new(2);
        let cfg = EncoderConfig::small(20, 16, 4);
        let enc = TransformerEncoder::new(&mut pb, "enc", cfg.clone()).unwrap();
        let dec = TransformerDecoder::new(&mut pb, "dec", cfg, enc.token_embedding.clone(), 1).unwrap();
        let dev = Device::Cpu;
        let memory = Tensor::ones((1, 3, 64), DType::F32, &dev).unwrap();
        let mbias = attention_bias(&Tensor::ones((1, 3), DType::F32, &dev).unwrap()).unwrap();
        let full = dec
            .forward(&Tensor::new(&[[7u32, 8, 9]], &dev).unwrap(), &memory, &mbias, &mut Ctx::eval())
            .unwrap();
        let prefix = dec
            .forward(&Tensor::new(&[[7u32, 8]], &dev).unwrap(), &memory, &mbias, &mut Ctx::eval())
            .unwrap();
        let a = full.narrow(1, 0, 2).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = prefix.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn dropout_is_seeded() {
        let x = Tensor::ones((4, 8), DType::F32, &Device::Cpu).unwrap();
        let a = Ctx::train(5).dropout(&x, 0.5).unwrap().to_vec2::<f32>().unwrap();
        let b = Ctx::train(5).dropout(&x, 0.5).unwrap().to_vec2::<f32>().unwrap();
        assert_eq!(a, b);
        let e = Ctx::eval().dropout(&x, 0.5).unwrap().to_vec2::<f32>().unwrap();
        assert!(e.iter().flatten().all(|v| *v == 1.0));
    }
}
