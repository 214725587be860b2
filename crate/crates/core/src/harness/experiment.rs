//! End-to-end runs: warm start, training arms, evaluation and output files.

use std::fs;
use std::path::Path;

use super::config::ExperimentConfig;
use super::eval::{evaluate, EvalReport};
use super::report::{bar_chart, line_chart};
use super::tasks::{generate_instances, Instance};
use crate::error::Result;
use crate::model::{init_params, ModelParams};
use crate::training::{sft_warm_start, train_loop, write_metrics_csv, StepMetrics, TrainMode, EVAL_INDEX_OFFSET};

/// Fresh model trained on reference completions with full context. Returns
/// the per-step warm-start loss as well.
pub fn warm_start(cfg: &ExperimentConfig) -> Result<(ModelParams, Vec<f64>)> {
    let mut params = init_params(&cfg.seeded_model())?;
    let losses = sft_warm_start(&mut params, &cfg.task, &cfg.seeded_sft())?;
    Ok((params, losses))
}

/// One training variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    pub mode: TrainMode,
    pub interoception: bool,
    pub rate_spread: bool,
}

impl Arm {
    pub fn plain(mode: TrainMode) -> Self {
        Self {
            mode,
            interoception: false,
            rate_spread: false,
        }
    }
}

/// Policy-gradient training from `base`. Other training settings come from
/// `cfg.train`.
pub fn train_arm(
    base: &ModelParams,
    cfg: &ExperimentConfig,
    arm: Arm,
    on_step: impl FnMut(&StepMetrics),
) -> Result<(ModelParams, Vec<StepMetrics>)> {
    let mut params = base.clone();
    let train = crate::training::TrainConfig {
        mode: arm.mode,
        interoception: arm.interoception,
        rate_spread: arm.rate_spread,
        ..cfg.seeded_train()
    };
    let metrics = train_loop(&mut params, &cfg.task, &cfg.eviction, &cfg.curriculum, &train, cfg.train_steps, on_step)?;
    Ok((params, metrics))
}

/// Held-out instances, disjoint from every training index.
pub fn eval_set(cfg: &ExperimentConfig) -> Vec<Instance> {
    generate_instances(&cfg.task, EVAL_INDEX_OFFSET, cfg.eval_instances)
}

pub fn run_eval(params: &ModelParams, cfg: &ExperimentConfig, rates: &[f64], tagged: bool) -> Result<EvalReport> {
    let opts = super::eval::EvalOptions {
        tagged,
        ..cfg.seeded_eval()
    };
    evaluate(params, &cfg.task, &eval_set(cfg), &cfg.eval_scorers, rates, &cfg.eviction, &opts)
}

/// `metrics.csv` plus reward, grad-norm and peak-cache charts.
pub fn write_training_outputs(dir: &Path, metrics: &[StepMetrics]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(fs::File::create(dir.join("metrics.csv"))?, metrics)?;
    let series = |name: &str, f: fn(&StepMetrics) -> f64| {
        vec![(name.to_string(), metrics.iter().map(|m| (m.step as f64, f(m))).collect::<Vec<_>>())]
    };
    fs::write(dir.join("reward.svg"), line_chart("mean reward", "step", "reward", &series("reward", |m| m.mean_reward)))?;
    fs::write(dir.join("grad_norm.svg"), line_chart("gradient norm", "step", "norm", &series("grad norm", |m| m.grad_norm)))?;
    fs::write(
        dir.join("peak_cache.svg"),
        line_chart("mean peak cache", "step", "entries", &series("peak", |m| m.mean_peak_cache)),
    )?;
    Ok(())
}

/// `eval.csv` plus an accuracy-vs-rate chart per scorer and a bar chart of
/// peak reduction at the largest rate.
pub fn write_eval_outputs(dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("eval.csv"), report.to_csv())?;
    let mut scorers: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !scorers.contains(&r.scorer.as_str()) {
            scorers.push(&r.scorer);
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = scorers
        .iter()
        .map(|s| {
            let pts = report.rows.iter().filter(|r| r.scorer == *s).map(|r| (r.rate, r.accuracy)).collect();
            (s.to_string(), pts)
        })
        .collect();
    fs::write(dir.join("accuracy.svg"), line_chart("accuracy by eviction rate", "eviction rate", "accuracy", &series))?;
    let top = report.rows.iter().map(|r| r.rate).fold(0.0, f64::max);
    let bars: Vec<(String, f64)> = report
        .rows
        .iter()
        .filter(|r| r.rate == top)
        .map(|r| (r.scorer.clone(), r.peak_reduction))
        .collect();
    fs::write(dir.join("peak_reduction.svg"), bar_chart("peak cache reduction", "reduction", &bars))?;
    Ok(())
}
