//! Supervised warm start on reference completions, standing in for a
//! pretrained model before reinforcement learning.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizer::{AdamW, OptimizerConfig};
use super::trainer::build_prompt;
use crate::autograd::Tape;
use crate::error::{NgcError, Result};
use crate::harness::tasks::TaskSpec;
use crate::model::{causal_masks, forward_masked, Gradients, ModelParams, ModelVars};
use crate::sampler::StreamKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftConfig {
    pub steps: u64,
    pub batch: usize,
    pub optimizer: OptimizerConfig,
    /// Each example carries a tag drawn from these percentages with
    /// probability `tag_fraction`, and the untagged filler otherwise.
    pub tag_percents: Vec<f64>,
    pub tag_fraction: f64,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            steps: 600,
            batch: 16,
            optimizer: OptimizerConfig {
                lr: 3e-3,
                ..OptimizerConfig::default()
            },
            tag_percents: vec![0.0, 25.0, 50.0],
            tag_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SftConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch == 0 {
            return Err(NgcError::Config("sft batch must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tag_fraction) {
            return Err(NgcError::Config("tag_fraction must lie in [0, 1]".into()));
        }
        if self.tag_fraction > 0.0 && self.tag_percents.is_empty() {
            return Err(NgcError::Config("tag_fraction > 0 needs tag_percents".into()));
        }
        Ok(())
    }
}

/// Mean next-token cross-entropy of the completion and its gradient.
pub fn completion_cross_entropy(params: &ModelParams, tokens: &[usize], prompt_len: usize) -> Result<(f64, Gradients)> {
    if prompt_len == 0 || prompt_len >= tokens.len() {
        return Err(NgcError::Usage(format!("prompt length {prompt_len} for {} tokens", tokens.len())));
    }
    let tape = Tape::new();
    let vars = ModelVars::load(&tape, params)?;
    let fwd = forward_masked(&vars, tokens, &causal_masks(params.config.n_layers, tokens.len()))?;
    let rows: Vec<usize> = (prompt_len - 1..tokens.len() - 1).collect();
    let lp = fwd
        .logits
        .gather_rows(&rows)?
        .log_softmax_lastdim()?
        .pick_per_row(&tokens[prompt_len..])?;
    let loss = lp.mean()?.neg()?;
    tape.backward(loss)?;
    Ok((loss.item(), vars.grads()))
}

/// Teacher-forced training on reference completions. Returns the mean loss
/// of every step.
pub fn sft_warm_start(params: &mut ModelParams, task: &TaskSpec, cfg: &SftConfig) -> Result<Vec<f64>> {
    task.validate()?;
    cfg.validate()?;
    let mut opt = AdamW::new(params);
    let mut losses = Vec::with_capacity(cfg.steps as usize);
    for step in 0..cfg.steps {
        let examples = (0..cfg.batch as u64)
            .map(|i| {
                let id = step * cfg.batch as u64 + i;
                let instance = task.instance(id);
                let mut rng = StreamKey {
                    seed: cfg.seed,
                    trajectory: id,
                    layer: u64::MAX - 3,
                    round: 0,
                }
                .rng();
                let tag = (rng.gen::<f64>() < cfg.tag_fraction)
                    .then(|| cfg.tag_percents[rng.gen_range(0..cfg.tag_percents.len())]);
                let mut tokens = build_prompt(&instance, task, tag)?;
                let prompt_len = tokens.len();
                tokens.extend(instance.reference_completion());
                Ok((tokens, prompt_len))
            })
            .collect::<Result<Vec<_>>>()?;
        let parts: Vec<(f64, Gradients)> = examples
            .par_iter()
            .map(|(t, p)| completion_cross_entropy(params, t, *p))
            .collect::<Result<_>>()?;
        let mut grads = Gradients::zeros_like(params);
        let mut total = 0.0;
        for (l, g) in &parts {
            total += l;
            grads.add_assign(g)?;
        }
        let n = parts.len() as f64;
        grads.scale(1.0 / n);
        opt.update(params, &grads, &cfg.optimizer)?;
        losses.push(total / n);
    }
    Ok(losses)
}
