use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::autograd::Tensor;
use crate::error::{NgcError, Result};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub attn_norm: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub mlp_norm: Tensor,
    pub w1: Tensor,
    pub w2: Tensor,
}

/// Every weight of the model. Token and eviction policies share all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embed: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_norm: Tensor,
    pub head: Tensor,
}

fn normal(shape: Vec<usize>, std: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let dist = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    let values = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, values).expect("finite normal draws")
}

fn ones(width: usize) -> Tensor {
    Tensor::new(vec![width], vec![1.0; width]).expect("finite")
}

/// Deterministic scaled-normal initialization. Residual output projections
/// (`wo`, `w2`) use `INIT_STD / sqrt(2L)`; norm weights start at one.
pub fn init_params(config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.d_model;
    let h = config.d_hidden();
    let out_std = INIT_STD / (2.0 * config.n_layers as f64).sqrt();
    let embed = normal(vec![config.vocab, d], INIT_STD, &mut rng);
    let layers = (0..config.n_layers)
        .map(|_| LayerParams {
            attn_norm: ones(d),
            wq: normal(vec![d, d], INIT_STD, &mut rng),
            wk: normal(vec![d, d], INIT_STD, &mut rng),
            wv: normal(vec![d, d], INIT_STD, &mut rng),
            wo: normal(vec![d, d], out_std, &mut rng),
            mlp_norm: ones(d),
            w1: normal(vec![d, h], INIT_STD, &mut rng),
            w2: normal(vec![h, d], out_std, &mut rng),
        })
        .collect();
    let final_norm = ones(d);
    let head = normal(vec![d, config.vocab], INIT_STD, &mut rng);
    Ok(ModelParams {
        config: *config,
        embed,
        layers,
        final_norm,
        head,
    })
}

impl LayerParams {
    fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.attn_norm,
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.mlp_norm,
            &self.w1,
            &self.w2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.attn_norm,
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.mlp_norm,
            &mut self.w1,
            &mut self.w2,
        ]
    }
}

const LAYER_NAMES: [&str; 8] = ["attn_norm", "wq", "wk", "wv", "wo", "mlp_norm", "w1", "w2"];

impl ModelParams {
    /// All tensors with stable names, in canonical order.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_NAMES.iter().zip(layer.tensors()) {
                out.push((format!("layers.{l}.{name}"), t));
            }
        }
        out.push(("final_norm".into(), &self.final_norm));
        out.push(("head".into(), &self.head));
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.push(&mut self.final_norm);
        out.push(&mut self.head);
        out
    }

    pub fn n_tensors(&self) -> usize {
        3 + 8 * self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let reference = init_shapes(&self.config);
        let named = self.named();
        if named.len() != reference.len() {
            return Err(NgcError::Dimension(format!(
                "{} tensors for {} layers",
                named.len(),
                self.config.n_layers
            )));
        }
        for ((name, t), shape) in named.iter().zip(&reference) {
            if &t.shape != shape {
                return Err(NgcError::Dimension(format!("{name}: shape {:?}, expected {shape:?}", t.shape)));
            }
            if !t.is_finite() {
                return Err(NgcError::Numeric(format!("{name} holds a non-finite value")));
            }
        }
        Ok(())
    }
}

/// Canonical tensor shapes for a configuration.
pub fn init_shapes(config: &ModelConfig) -> Vec<Vec<usize>> {
    let d = config.d_model;
    let h = config.d_hidden();
    let mut out = vec![vec![config.vocab, d]];
    for _ in 0..config.n_layers {
        out.extend([vec![d], vec![d, d], vec![d, d], vec![d, d], vec![d, d], vec![d], vec![d, h], vec![h, d]]);
    }
    out.push(vec![d]);
    out.push(vec![d, config.vocab]);
    out
}

/// Gradient buffers aligned with [`ModelParams::named`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            tensors: params.named().iter().map(|(_, t)| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(NgcError::Dimension("gradient sets of different models".into()));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            if a.len() != b.len() {
                return Err(NgcError::Dimension("gradient tensor length mismatch".into()));
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= c);
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }
}
