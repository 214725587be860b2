//! Accuracy and memory sweeps over scorers and eviction rates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{avg_peak_reduction, mean_stderr, pass_at_k, PeakPair};
use super::tasks::{Instance, TaskSpec};
use super::vocab::EOS;
use crate::cache::EvictionConfig;
use crate::error::{NgcError, Result};
use crate::model::ModelParams;
use crate::rollout::{rollout, EvictionPolicy, RolloutConfig};
use crate::scorers::ScorerKind;
use crate::training::{build_prompt, score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    /// Completions sampled per instance.
    pub samples: usize,
    /// `k` values reported as pass@k; each must be at most `samples`.
    pub ks: Vec<usize>,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub min_length: usize,
    /// Append the rate tag to every prompt.
    pub tagged: bool,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            samples: 4,
            ks: vec![1, 4],
            temperature: 1.0,
            max_new_tokens: 24,
            min_length: 0,
            tagged: false,
            seed: 0,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(NgcError::Config("eval samples must be positive".into()));
        }
        if self.ks.iter().any(|&k| k == 0 || k > self.samples) {
            return Err(NgcError::Config(format!("pass@k values {:?} must lie in 1..={}", self.ks, self.samples)));
        }
        if self.temperature < 0.0 {
            return Err(NgcError::Config("temperature must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scorer: String,
    pub rate: f64,
    pub accuracy: f64,
    pub std_err: f64,
    pub peak_reduction: f64,
    /// `(k, pass@k)` pairs.
    pub pass_at: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, scorer: &str, rate: f64) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.scorer == scorer && r.rate == rate)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let ks: Vec<usize> = self.rows.first().map(|r| r.pass_at.iter().map(|p| p.0).collect()).unwrap_or_default();
        write!(out, "scorer,eps,accuracy,std_err,peak_reduction")?;
        for k in &ks {
            write!(out, ",pass@{k}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(out, "{},{},{},{},{}", r.scorer, r.rate, r.accuracy, r.std_err, r.peak_reduction)?;
            for (_, v) in &r.pass_at {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

struct Outcome {
    correct: usize,
    lengths: Vec<usize>,
    prompt: usize,
}

fn run_instance(
    params: &ModelParams,
    task: &TaskSpec,
    instance: &Instance,
    eviction: Option<EvictionConfig>,
    policy: EvictionPolicy,
    opts: &EvalOptions,
) -> Result<Outcome> {
    let tag = opts.tagged.then(|| eviction.map_or(0.0, |e| e.rate) * 100.0);
    let prompt = build_prompt(instance, task, tag)?;
    let rc = RolloutConfig {
        eviction,
        policy,
        max_new_tokens: opts.max_new_tokens,
        temperature: opts.temperature,
        eos: Some(EOS),
        meta_token: None,
    };
    let mut correct = 0;
    let mut lengths = Vec::with_capacity(opts.samples);
    for s in 0..opts.samples {
        let t = rollout(params, &prompt, &rc, opts.seed, instance.index * opts.samples as u64 + s as u64)?;
        correct += (score(instance, &t, opts.min_length) > 0.0) as usize;
        lengths.push(t.completion().len());
    }
    Ok(Outcome {
        correct,
        lengths,
        prompt: prompt.len(),
    })
}

fn evaluate_cell(
    params: &ModelParams,
    task: &TaskSpec,
    instances: &[Instance],
    eviction: Option<EvictionConfig>,
    policy: EvictionPolicy,
    opts: &EvalOptions,
) -> Result<Vec<Outcome>> {
    instances
        .par_iter()
        .map(|inst| run_instance(params, task, inst, eviction, policy, opts))
        .collect()
}

/// Samples `opts.samples` completions per instance for every
/// `(scorer, rate)` cell. The NGC scorer keeps its greedy top-k blocks;
/// rate 0 disables eviction. Peak reduction compares each cell's completion
/// lengths against the no-eviction run of the same model.
pub fn evaluate(
    params: &ModelParams,
    task: &TaskSpec,
    instances: &[Instance],
    scorers: &[ScorerKind],
    rates: &[f64],
    eviction: &EvictionConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    opts.validate()?;
    if instances.is_empty() {
        return Err(NgcError::Usage("no evaluation instances".into()));
    }
    if eviction.layers != params.config.n_layers {
        return Err(NgcError::Load(format!(
            "checkpoint has {} layers, eviction config expects {}",
            params.config.n_layers, eviction.layers
        )));
    }
    for s in scorers {
        s.validate()?;
    }
    let baseline = evaluate_cell(params, task, instances, None, EvictionPolicy::Sampled, opts)?;
    let mut report = EvalReport::default();
    for kind in scorers {
        for &rate in rates {
            let outcomes = if rate == 0.0 {
                None
            } else {
                let ev = eviction.with_rate(rate);
                ev.validate()?;
                Some(evaluate_cell(params, task, instances, Some(ev), EvictionPolicy::Deterministic(*kind), opts)?)
            };
            let outcomes = outcomes.as_ref().unwrap_or(&baseline);
            let per_instance: Vec<f64> = outcomes.iter().map(|o| o.correct as f64 / opts.samples as f64).collect();
            let (accuracy, std_err) = mean_stderr(&per_instance);
            let pairs: Vec<PeakPair> = baseline
                .iter()
                .zip(outcomes)
                .flat_map(|(b, m)| {
                    b.lengths.iter().zip(&m.lengths).map(|(&bl, &ml)| PeakPair {
                        prompt: m.prompt,
                        baseline: bl,
                        method: ml,
                    })
                })
                .collect();
            let peak_reduction = avg_peak_reduction(&pairs, rate, eviction)?;
            let mut pass_at = Vec::with_capacity(opts.ks.len());
            for &k in &opts.ks {
                let vals = outcomes
                    .iter()
                    .map(|o| pass_at_k(opts.samples, o.correct, k))
                    .collect::<Result<Vec<_>>>()?;
                pass_at.push((k, vals.iter().sum::<f64>() / vals.len() as f64));
            }
            report.rows.push(EvalRow {
                scorer: kind.to_string(),
                rate,
                accuracy,
                std_err,
                peak_reduction,
                pass_at,
            });
        }
    }
    Ok(report)
}
