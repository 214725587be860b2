//! Incremental generation under grow-then-evict.
//!
//! Each token is decoded against the alive cache; whenever a round is due
//! (and more tokens will follow) every layer scores its candidate blocks and
//! keeps `K` of them. The next token is then processed against the reduced
//! cache. Every decision lands in the trajectory's [`RetentionLog`].

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::autograd::kernels::logsumexp;
use crate::cache::{
    apply_retention, keep_count, partition_blocks, should_fire, CacheState, EvictionConfig, RetentionLog, RoundRecord,
};
use crate::error::{NgcError, Result};
use crate::model::{decode_step, ModelParams};
use crate::sampler::{greedy_topk, gumbel_topk, sequence_logprob, StreamKey};
use crate::scorers::{baseline_keep_set, block_scores, RoundContext, ScorerKind};

/// How a layer chooses which blocks survive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvictionPolicy {
    /// Gumbel-top-k over the model's own block scores (training).
    Sampled,
    /// Deterministic keep set from a scorer; `NgcAttention` is greedy top-k.
    Deterministic(ScorerKind),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    /// `None` disables eviction entirely.
    pub eviction: Option<EvictionConfig>,
    pub policy: EvictionPolicy,
    pub max_new_tokens: usize,
    /// Sampling temperature; 0 selects the arg-max token.
    pub temperature: f64,
    pub eos: Option<usize>,
    /// Token forced as the first generation after every round.
    pub meta_token: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Prompt followed by the completion.
    pub tokens: Vec<usize>,
    pub prompt_len: usize,
    pub log: RetentionLog,
    /// Rollout-time log-probability of each completion token (temperature 1,
    /// unmasked for forced tokens).
    pub token_logprobs: Vec<f64>,
    pub peak_entries_total: usize,
    pub rate: f64,
    pub reward: f64,
}

impl Trajectory {
    pub fn completion(&self) -> &[usize] {
        &self.tokens[self.prompt_len..]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Forces `token`: every other logit becomes `-inf`, the forced one 0.
pub fn force_meta_token(logits: &[f64], token: usize) -> Result<Vec<f64>> {
    if token >= logits.len() {
        return Err(NgcError::Usage(format!("meta token {token} outside vocabulary of {}", logits.len())));
    }
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    out[token] = 0.0;
    Ok(out)
}

fn sample_token(logits: &[f64], temperature: f64, rng: &mut impl rand::Rng) -> Result<usize> {
    if temperature == 0.0 {
        return Ok(greedy_topk(logits, 1)?[0]);
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let lse = logsumexp(&scaled);
    let weights: Vec<f64> = scaled.iter().map(|s| (s - lse).exp()).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| NgcError::Numeric(format!("token distribution: {e}")))?;
    Ok(dist.sample(rng))
}

struct RoundInputs<'a> {
    params: &'a ModelParams,
    eviction: &'a EvictionConfig,
    policy: EvictionPolicy,
    seed: u64,
    trajectory: u64,
}

fn run_round(inputs: &RoundInputs<'_>, cache: &mut CacheState, queries: &[VecDeque<Vec<f64>>], log: &mut RetentionLog) -> Result<()> {
    let cfg = inputs.params.config;
    let ev = inputs.eviction;
    let round = cache.rounds_fired;
    for layer in 0..cache.n_layers() {
        let alive = cache.alive_indices(layer);
        let candidates = alive.len().saturating_sub(ev.window);
        if candidates == 0 {
            return Err(NgcError::State(format!("layer {layer} has no eviction candidates")));
        }
        let partition = partition_blocks(candidates, ev.block_size)?;
        let keep = keep_count(partition.len(), ev.rate);
        let keys: Vec<Vec<f64>> = cache.layers[layer][..candidates].iter().map(|e| e.key.clone()).collect();
        let recent: Vec<Vec<f64>> = queries[layer].iter().cloned().collect();
        let ctx = RoundContext {
            keys: &keys,
            queries: &recent,
            partition: &partition,
            window: ev.window,
            keep,
            n_heads: cfg.n_heads,
            d_head: cfg.d_head(),
        };
        let (kept, logprob) = match inputs.policy {
            EvictionPolicy::Sampled => {
                let scores = block_scores(&ScorerKind::NgcAttention, &ctx)?.expect("scored");
                let mut rng = StreamKey::eviction(inputs.seed, inputs.trajectory, layer, round).rng();
                let draw = gumbel_topk(&scores, keep, &mut rng)?;
                (draw.sigma, Some(draw.logprob))
            }
            EvictionPolicy::Deterministic(ScorerKind::NgcAttention) => {
                let scores = block_scores(&ScorerKind::NgcAttention, &ctx)?.expect("scored");
                let sigma = greedy_topk(&scores, keep)?;
                let lp = sequence_logprob(&scores, &sigma)?;
                (sigma, Some(lp))
            }
            EvictionPolicy::Deterministic(kind) => (baseline_keep_set(&kind, &ctx)?, None),
        };
        apply_retention(cache, layer, &partition, &kept)?;
        log.push(RoundRecord {
            layer,
            round,
            alive_indices: alive,
            block_sizes: partition.sizes,
            kept_blocks: kept,
            logprob,
        });
    }
    cache.complete_round();
    Ok(())
}

/// Generates one trajectory. Randomness is keyed by `(seed, trajectory)`.
pub fn rollout(params: &ModelParams, prompt: &[usize], config: &RolloutConfig, seed: u64, trajectory: u64) -> Result<Trajectory> {
    let cfg = params.config;
    if prompt.is_empty() {
        return Err(NgcError::Usage("empty prompt".into()));
    }
    if let Some(ev) = &config.eviction {
        ev.validate()?;
        if ev.layers != cfg.n_layers {
            return Err(NgcError::Config(format!(
                "eviction configured for {} layers, model has {}",
                ev.layers, cfg.n_layers
            )));
        }
        if prompt.len() >= ev.cadence {
            return Err(NgcError::Config(format!(
                "prompt of {} tokens must be shorter than the cadence {}",
                prompt.len(),
                ev.cadence
            )));
        }
    }
    let max_total = (prompt.len() + config.max_new_tokens).min(cfg.max_seq);
    let query_window = match (&config.eviction, config.policy) {
        (Some(ev), EvictionPolicy::Deterministic(kind)) => kind.query_window(ev.window),
        (Some(ev), EvictionPolicy::Sampled) => ev.window,
        (None, _) => 0,
    };
    let round_inputs = config.eviction.as_ref().map(|ev| RoundInputs {
        params,
        eviction: ev,
        policy: config.policy,
        seed,
        trajectory,
    });

    let mut cache = CacheState::new(cfg.n_layers);
    let mut queries: Vec<VecDeque<Vec<f64>>> = vec![VecDeque::with_capacity(query_window + 1); cfg.n_layers];
    let mut log = RetentionLog::default();
    let mut tokens = prompt.to_vec();
    let mut token_logprobs = Vec::new();
    let mut token_rng = StreamKey::tokens(seed, trajectory).rng();
    let mut pos = 0;
    loop {
        let out = decode_step(params, &mut cache, tokens[pos])?;
        for (ring, q) in queries.iter_mut().zip(out.queries) {
            ring.push_back(q);
            if ring.len() > query_window {
                ring.pop_front();
            }
        }
        let at_eos = pos >= prompt.len() && config.eos == Some(tokens[pos]);
        if pos + 1 == max_total || at_eos {
            break;
        }
        let mut fired = false;
        if let Some(inputs) = &round_inputs {
            if should_fire(&cache, inputs.eviction) {
                run_round(inputs, &mut cache, &queries, &mut log)?;
                fired = true;
            }
        }
        if pos + 1 == tokens.len() {
            let logits = match config.meta_token {
                Some(meta) if fired => force_meta_token(&out.logits, meta)?,
                _ => out.logits.clone(),
            };
            let next = sample_token(&logits, config.temperature, &mut token_rng)?;
            token_logprobs.push(out.logits[next] - logsumexp(&out.logits));
            tokens.push(next);
        }
        pos += 1;
    }
    Ok(Trajectory {
        tokens,
        prompt_len: prompt.len(),
        log,
        token_logprobs,
        peak_entries_total: cache.peak_entries_total,
        rate: config.eviction.map_or(0.0, |e| e.rate),
        reward: 0.0,
    })
}
