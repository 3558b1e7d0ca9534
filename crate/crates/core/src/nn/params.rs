use candle_core::{DType, Device, Tensor, Var};
use candle_nn::Linear;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::HashMap;
use std::path::Path;

use super::layers::LayerNorm;
use crate::error::{Error, Result};

/// Registers named trainable tensors with seeded initialization.
pub struct ParamBuilder {
    device: Device,
    rng: StdRng,
    vars: Vec<(String, Var)>,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        ParamBuilder {
            device: Device::Cpu,
            rng: StdRng::seed_from_u64(seed),
            vars: Vec::new(),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn register(&mut self, name: &str, tensor: Tensor) -> Result<Tensor> {
        debug_assert!(self.vars.iter().all(|(n, _)| n != name), "duplicate parameter {name}");
        let var = Var::from_tensor(&tensor)?;
        let t = var.as_tensor().clone();
        self.vars.push((name.to_owned(), var));
        Ok(t)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n)
            .map(|_| self.rng.random_range(-bound..bound) as f32)
            .collect();
        let t = Tensor::from_vec(data, shape, &self.device)?;
        self.register(name, t)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let t = (Tensor::ones(shape, DType::F32, &self.device)? * value)?;
        self.register(name, t)
    }

    /// Xavier-uniform weight `[out, in]`, zero bias.
    pub fn linear(&mut self, name: &str, input: usize, output: usize) -> Result<Linear> {
        let bound = (6.0 / (input + output) as f64).sqrt();
        let w = self.uniform(&format!("{name}.weight"), &[output, input], bound)?;
        let b = self.constant(&format!("{name}.bias"), &[output], 0.0)?;
        Ok(Linear::new(w, Some(b)))
    }

    pub fn embedding(&mut self, name: &str, rows: usize, dim: usize) -> Result<Tensor> {
        self.uniform(name, &[rows, dim], 0.1)
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize) -> Result<LayerNorm> {
        let w = self.constant(&format!("{name}.weight"), &[dim], 1.0)?;
        let b = self.constant(&format!("{name}.bias"), &[dim], 0.0)?;
        Ok(LayerNorm::new(w, b))
    }

    pub fn finish(self) -> Params {
        Params { vars: self.vars }
    }
}

/// Named trainable parameters of a model.
#[derive(Clone)]
pub struct Params {
    vars: Vec<(String, Var)>,
}

impl Params {
    pub fn vars(&self) -> Vec<Var> {
        self.vars.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn count(&self) -> usize {
        self.vars.iter().map(|(_, v)| v.as_tensor().elem_count()).sum()
    }

    /// Deep copy of current values.
    pub fn snapshot(&self) -> Result<Vec<Tensor>> {
        Ok(self
            .vars
            .iter()
            .map(|(_, v)| v.as_tensor().copy())
            .collect::<candle_core::Result<_>>()?)
    }

    pub fn restore(&self, snapshot: &[Tensor]) -> Result<()> {
        for ((_, var), value) in self.vars.iter().zip(snapshot) {
            var.set(value)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let map: HashMap<String, Tensor> = self
            .vars
            .iter()
            .map(|(n, v)| (n.clone(), v.as_tensor().clone()))
            .collect();
        candle_core::safetensors::save(&map, path)?;
        Ok(())
    }

    /// Overwrites every parameter from a safetensors file; names and shapes
    /// must match exactly.
    pub fn load(&self, path: &Path) -> Result<()> {
        let map = candle_core::safetensors::load(path, &Device::Cpu)?;
        if map.len() != self.vars.len() {
            return Err(Error::Setup(format!(
                "{}: checkpoint has {} tensors, model expects {}",
                path.display(),
                map.len(),
                self.vars.len()
            )));
        }
        for (name, var) in &self.vars {
            let value = map
                .get(name)
                .ok_or_else(|| Error::Setup(format!("{}: missing tensor {name}", path.display())))?;
            if value.dims() != var.as_tensor().dims() {
                return Err(Error::Setup(format!(
                    "{}: tensor {name} has shape {:?}, expected {:?}",
                    path.display(),
                    value.dims(),
                    var.as_tensor().dims()
                )));
            }
            var.set(value)?;
        }
        Ok(())
    }
}

/// Forward-pass context: evaluation, or training with a seeded dropout stream.
pub struct Ctx {
    rng: Option<StdRng>,
}

impl Ctx {
    pub fn eval() -> Self {
        Ctx { rng: None }
    }

    pub fn train(seed: u64) -> Self {
        Ctx {
            rng: Some(StdRng::seed_from_u64(seed)),
        }
    }

    pub fn is_train(&self) -> bool {
        self.rng.is_some()
    }

    pub fn rng(&mut self) -> Option<&mut StdRng> {
        self.rng.as_mut()
    }

    /// Inverted dropout. Identity in evaluation mode or when `p == 0`.
    pub fn dropout(&mut self, x: &Tensor, p: f64) -> Result<Tensor> {
        let Some(rng) = self.rng.as_mut() else {
            return Ok(x.clone());
        };
        if p <= 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - p;
        let scale = (1.0 / keep) as f32;
        let mask: Vec<f32> = (0..x.elem_count())
            .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape(), x.device())?;
        Ok(x.mul(&mask)?)
    }
}
