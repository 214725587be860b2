use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curriculum::{curriculum_rate, interoception_tag, CurriculumConfig};
use super::losses::{apply_min_length_penalty, group_advantages, mem_loss, token_loss};
use super::optimizer::{AdamW, OptimizerConfig};
use crate::autograd::Tape;
use crate::cache::EvictionConfig;
use crate::error::{NgcError, Result};
use crate::harness::tasks::{verify, Instance, TaskSpec};
use crate::harness::vocab::{tokenize, EOS};
use crate::model::{causal_masks, Gradients, ModelParams, ModelVars};
use crate::replay::{build_replay_masks, replay_forward};
use crate::rollout::{rollout, EvictionPolicy, RolloutConfig, Trajectory};
use crate::sampler::StreamKey;

/// Which parts of the joint objective are trained, and under which masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Replay masks, token and eviction terms.
    Ngc,
    /// Replay masks, token term only.
    TokenOnly,
    /// Rollouts evict, but tokens are scored under full causal context.
    TargetedDropout,
    /// Rollouts never evict.
    NoEviction,
}

impl TrainMode {
    pub const ALL: [TrainMode; 4] = [Self::Ngc, Self::TokenOnly, Self::TargetedDropout, Self::NoEviction];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ngc => "ngc",
            Self::TokenOnly => "token-only",
            Self::TargetedDropout => "targeted-dropout",
            Self::NoEviction => "no-eviction",
        }
    }

    pub fn evicts(&self) -> bool {
        *self != Self::NoEviction
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = NgcError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| NgcError::Usage(format!("unknown training mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub mode: TrainMode,
    /// Rollouts per prompt (`G`).
    pub group_size: usize,
    /// Prompts per optimizer step.
    pub groups_per_step: usize,
    /// Completions shorter than this many tokens earn no reward.
    pub min_length: usize,
    pub meta_token: Option<usize>,
    /// Adds the rate tag to every prompt. Implies `rate_spread`.
    pub interoception: bool,
    /// Draws each group's rate from the current curriculum stage ± one
    /// level instead of using the stage's rate.
    #[serde(default)]
    pub rate_spread: bool,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            mode: TrainMode::Ngc,
            group_size: 8,
            groups_per_step: 2,
            min_length: 0,
            meta_token: None,
            interoception: false,
            rate_spread: false,
            temperature: 1.0,
            max_new_tokens: 24,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.group_size < 2 {
            return Err(NgcError::Config("group_size must be at least 2".into()));
        }
        if self.groups_per_step == 0 || self.max_new_tokens == 0 {
            return Err(NgcError::Config("groups_per_step and max_new_tokens must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(NgcError::Config("training temperature must be positive".into()));
        }
        Ok(())
    }
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub mean_reward: f64,
    pub grad_norm: f64,
    pub retention_rate: f64,
    pub mean_peak_cache: f64,
    pub loss_token: f64,
    pub loss_mem: f64,
}

pub const METRICS_HEADER: &str = "step,mean_reward,grad_norm,retention_rate,mean_peak_cache,loss_token,loss_mem";

impl StepMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.mean_reward,
            self.grad_norm,
            self.retention_rate,
            self.mean_peak_cache,
            self.loss_token,
            self.loss_mem
        )
    }
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[StepMetrics]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// `G` rollouts of one prompt under a shared eviction rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub instance: Instance,
    pub prompt: Vec<usize>,
    /// Eviction rate `ε` shared by the group; 0 means no eviction.
    pub rate: f64,
    pub trajectories: Vec<Trajectory>,
}

impl RolloutGroup {
    pub fn rewards(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.reward).collect()
    }
}

/// Loss values and accumulated gradient of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub loss_token: f64,
    pub loss_mem: f64,
    pub grads: Gradients,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.loss_token + self.loss_mem
    }
}

/// Replays one trajectory and returns its contribution to the loss with
/// weight `advantage / scale`, plus the gradient.
pub fn trajectory_loss(
    params: &ModelParams,
    trajectory: &Trajectory,
    advantage: f64,
    scale: f64,
    eviction: Option<&EvictionConfig>,
    mode: TrainMode,
) -> Result<BatchLoss> {
    let tape = Tape::new();
    let vars = ModelVars::load(&tape, params)?;
    let size = trajectory.len();
    let layers = params.config.n_layers;
    let (masks, mem_cfg) = match mode {
        TrainMode::Ngc | TrainMode::TokenOnly => {
            let set = build_replay_masks(&trajectory.log, size, layers, eviction.map(|e| e.cadence))?;
            (set, if mode == TrainMode::Ngc { eviction } else { None })
        }
        TrainMode::TargetedDropout | TrainMode::NoEviction => (
            crate::replay::ReplayMaskSet {
                size,
                layers: causal_masks(layers, size),
            },
            None,
        ),
    };
    let out = replay_forward(&vars, &trajectory.tokens, trajectory.prompt_len, &masks, &trajectory.log, mem_cfg)?;
    let weight = [advantage / scale];
    let tok = token_loss(&tape, &[out.token_logprobs], &weight)?;
    let mem = mem_loss(&tape, &[out.eviction_logprobs], &weight)?;
    let total = tok.add(&mem)?;
    if !total.item().is_finite() {
        return Err(NgcError::Numeric("non-finite loss".into()));
    }
    tape.backward(total)?;
    Ok(BatchLoss {
        loss_token: tok.item(),
        loss_mem: mem.item(),
        grads: vars.grads(),
    })
}

/// Trajectories, their advantages and the eviction config they ran under.
pub type LossGroup = (Vec<Trajectory>, Vec<f64>, Option<EvictionConfig>);

/// Joint loss over groups: each group's loss is the per-trajectory sum
/// weighted by `Â_i / G`, and groups are averaged. Trajectories with zero
/// advantage are skipped.
pub fn batch_loss(params: &ModelParams, groups: &[LossGroup], mode: TrainMode) -> Result<BatchLoss> {
    let mut jobs = Vec::new();
    for (trajs, adv, eviction) in groups {
        if trajs.len() != adv.len() {
            return Err(NgcError::Dimension(format!("{} trajectories, {} advantages", trajs.len(), adv.len())));
        }
        let scale = (trajs.len() * groups.len()) as f64;
        jobs.extend(trajs.iter().zip(adv).filter(|(_, &a)| a != 0.0).map(|(t, &a)| (t, a, scale, eviction.as_ref())));
    }
    let parts: Vec<BatchLoss> = jobs
        .par_iter()
        .map(|&(t, a, scale, eviction)| trajectory_loss(params, t, a, scale, eviction, mode))
        .collect::<Result<_>>()?;
    let mut acc = BatchLoss {
        loss_token: 0.0,
        loss_mem: 0.0,
        grads: Gradients::zeros_like(params),
    };
    for p in parts {
        acc.loss_token += p.loss_token;
        acc.loss_mem += p.loss_mem;
        acc.grads.add_assign(&p.grads)?;
    }
    Ok(acc)
}

/// Instance indices at or above this offset are reserved for evaluation.
pub const EVAL_INDEX_OFFSET: u64 = 1 << 40;

/// Prompt for `instance`, carrying the rate tag when `tag_percent` is set.
pub fn build_prompt(instance: &Instance, task: &TaskSpec, tag_percent: Option<f64>) -> Result<Vec<usize>> {
    match tag_percent {
        Some(p) => Ok(instance.prompt(Some(&tokenize(&interoception_tag(p))?), task.tag_slot)),
        None => Ok(instance.prompt(None, task.tag_slot)),
    }
}

/// Scores a finished trajectory: exact-match reward, then the minimum
/// length rule.
pub fn score(instance: &Instance, trajectory: &Trajectory, min_length: usize) -> f64 {
    let completion = trajectory.completion();
    apply_min_length_penalty(verify(instance, completion), completion.len(), min_length)
}

fn group_rate(step: u64, curriculum: &CurriculumConfig, cfg: &TrainConfig, group: u64) -> f64 {
    if !cfg.mode.evicts() {
        return 0.0;
    }
    if !(cfg.interoception || cfg.rate_spread) {
        return 1.0 - curriculum_rate(step, curriculum);
    }
    let mut rng = StreamKey {
        seed: cfg.seed,
        trajectory: group,
        layer: u64::MAX - 2,
        round: step,
    }
    .rng();
    let stage = curriculum.stage(step) as i64 + rng.gen_range(-1..=1);
    1.0 - curriculum.levels[stage.clamp(0, curriculum.final_stage() as i64) as usize]
}

/// Samples `groups_per_step` groups of `group_size` rollouts for `step`.
pub fn sample_groups(
    params: &ModelParams,
    task: &TaskSpec,
    eviction: &EvictionConfig,
    curriculum: &CurriculumConfig,
    cfg: &TrainConfig,
    step: u64,
) -> Result<Vec<RolloutGroup>> {
    let g = cfg.group_size as u64;
    let p = cfg.groups_per_step as u64;
    let mut groups = Vec::new();
    for gi in 0..p {
        let id = step * p + gi;
        let instance = task.instance(id);
        let rate = group_rate(step, curriculum, cfg, id);
        let prompt = build_prompt(&instance, task, cfg.interoception.then_some(rate * 100.0))?;
        groups.push(RolloutGroup {
            instance,
            prompt,
            rate,
            trajectories: Vec::new(),
        });
    }
    let jobs: Vec<(usize, u64)> = (0..groups.len()).flat_map(|gi| (0..g).map(move |i| (gi, i))).collect();
    let trajs: Vec<Trajectory> = jobs
        .par_iter()
        .map(|&(gi, i)| {
            let group = &groups[gi];
            let rc = RolloutConfig {
                eviction: (group.rate > 0.0).then(|| eviction.with_rate(group.rate)),
                policy: EvictionPolicy::Sampled,
                max_new_tokens: cfg.max_new_tokens,
                temperature: cfg.temperature,
                eos: Some(EOS),
                meta_token: cfg.meta_token,
            };
            let mut t = rollout(params, &group.prompt, &rc, cfg.seed, (step * p + gi as u64) * g + i)?;
            t.reward = score(&group.instance, &t, cfg.min_length);
            Ok(t)
        })
        .collect::<Result<_>>()?;
    for ((gi, _), t) in jobs.into_iter().zip(trajs) {
        groups[gi].trajectories.push(t);
    }
    Ok(groups)
}

/// On-policy training: sample, score, replay, one optimizer step, repeat.
/// `on_step` sees every row of metrics as it is produced.
pub fn train_loop(
    params: &mut ModelParams,
    task: &TaskSpec,
    eviction: &EvictionConfig,
    curriculum: &CurriculumConfig,
    cfg: &TrainConfig,
    steps: u64,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<Vec<StepMetrics>> {
    task.validate()?;
    eviction.validate()?;
    curriculum.validate()?;
    cfg.validate()?;
    let mut opt = AdamW::new(params);
    let mut history = Vec::with_capacity(steps as usize);
    for step in 0..steps {
        let groups = sample_groups(params, task, eviction, curriculum, cfg, step)?;
        let mut batch = Vec::with_capacity(groups.len());
        for group in &groups {
            let ev = (group.rate > 0.0).then(|| eviction.with_rate(group.rate));
            batch.push((group.trajectories.clone(), group_advantages(&group.rewards())?, ev));
        }
        let loss = batch_loss(params, &batch, cfg.mode)?;
        if !loss.total().is_finite() {
            return Err(NgcError::Numeric(format!("non-finite loss at step {step}")));
        }
        let has_signal = batch.iter().any(|(_, a, _)| a.iter().any(|&x| x != 0.0));
        let grad_norm = if has_signal {
            opt.update(params, &loss.grads, &cfg.optimizer)
                .map_err(|e| NgcError::Numeric(format!("step {step}: {e}")))?
        } else {
            0.0
        };
        let trajs: Vec<&Trajectory> = groups.iter().flat_map(|g| &g.trajectories).collect();
        let n = trajs.len() as f64;
        let row = StepMetrics {
            step,
            mean_reward: trajs.iter().map(|t| t.reward).sum::<f64>() / n,
            grad_norm,
            retention_rate: groups.iter().map(|g| 1.0 - g.rate).sum::<f64>() / groups.len() as f64,
            mean_peak_cache: trajs.iter().map(|t| t.peak_entries_total as f64).sum::<f64>() / n,
            loss_token: loss.loss_token,
            loss_mem: loss.loss_mem,
        };
        on_step(&row);
        history.push(row);
    }
    Ok(history)
}
