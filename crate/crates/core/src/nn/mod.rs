//! Small transformer building blocks trained from scratch on CPU.
//!
//! Every random draw (initialization, dropout, shuffling) comes from a seeded
//! generator, so a run is reproducible for a fixed seed.

mod layers;
mod params;

pub use layers::{
    attention_bias, causal_bias, Attention, DecoderLayer, EncoderConfig, EncoderLayer, FeedForward,
    LayerNorm, TransformerDecoder, TransformerEncoder,
};
pub use params::{Ctx, ParamBuilder, Params};

use candle_core::{Device, Tensor};

use crate::error::Result;

/// Right-pads `rows` with `pad` into a `[rows, max_len]` u32 tensor.
pub fn pad_u32(rows: &[Vec<u32>], pad: u32, device: &Device) -> Result<Tensor> {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let mut flat = Vec::with_capacity(rows.len() * width);
    for r in rows {
        flat.extend_from_slice(r);
        flat.extend(std::iter::repeat_n(pad, width - r.len()));
    }
    Ok(Tensor::from_vec(flat, (rows.len(), width), device)?)
}

/// `[rows, max_len]` f32 mask, 1 for real positions and 0 for padding.
pub fn length_mask(lengths: &[usize], device: &Device) -> Result<Tensor> {
    let width = lengths.iter().copied().max().unwrap_or(0).max(1);
    let mut flat = Vec::with_capacity(lengths.len() * width);
    for &len in lengths {
        flat.extend((0..width).map(|i| if i < len { 1f32 } else { 0f32 }));
    }
    Ok(Tensor::from_vec(flat, (lengths.len(), width), device)?)
}
