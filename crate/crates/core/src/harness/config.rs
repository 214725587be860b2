//! Experiment configuration: one JSON document covering every module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::eval::EvalOptions;
use super::tasks::TaskSpec;
use super::vocab::{tokenize, VOCAB_SIZE};
use crate::cache::EvictionConfig;
use crate::error::{NgcError, Result};
use crate::model::ModelConfig;
use crate::scorers::ScorerKind;
use crate::training::{interoception_tag, CurriculumConfig, OptimizerConfig, SftConfig, TrainConfig};

/// Environment variable that overrides [`ExperimentConfig::seed`].
pub const SEED_ENV: &str = "NGC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub output_dir: PathBuf,
    /// Seeds model init, warm start and training; task instances use
    /// `task.seed`.
    pub seed: u64,
    pub model: ModelConfig,
    pub task: TaskSpec,
    pub eviction: EvictionConfig,
    pub curriculum: CurriculumConfig,
    pub sft: SftConfig,
    pub train: TrainConfig,
    pub train_steps: u64,
    pub eval: EvalOptions,
    pub eval_instances: usize,
    pub eval_rates: Vec<f64>,
    pub eval_scorers: Vec<ScorerKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let task = TaskSpec::default();
        let completion = task.think + 4;
        Self {
            run_id: "desk".into(),
            output_dir: PathBuf::from("runs"),
            seed: 0,
            model: ModelConfig {
                n_layers: 2,
                n_heads: 2,
                d_model: 32,
                vocab: VOCAB_SIZE,
                max_seq: 48,
                seed: 0,
            },
            task,
            eviction: EvictionConfig {
                cadence: 16,
                rate: 0.5,
                block_size: 2,
                window: 2,
                layers: 2,
            },
            curriculum: CurriculumConfig {
                levels: vec![1.0, 0.75, 0.5],
                steps_per_stage: 100,
                alpha: 0.6,
            },
            sft: SftConfig::default(),
            train: TrainConfig {
                optimizer: OptimizerConfig {
                    lr: 1e-3,
                    ..OptimizerConfig::default()
                },
                min_length: completion,
                max_new_tokens: completion + 4,
                ..TrainConfig::default()
            },
            train_steps: 300,
            eval: EvalOptions {
                min_length: completion,
                max_new_tokens: completion + 4,
                ..EvalOptions::default()
            },
            eval_instances: 100,
            eval_rates: vec![0.0, 0.25, 0.5, 0.75],
            eval_scorers: vec![
                ScorerKind::NgcAttention,
                ScorerKind::StreamingWindow {
                    n_sink: crate::scorers::DEFAULT_SINK_TOKENS,
                    window: usize::MAX,
                },
                ScorerKind::SnapAttention { observation: 8 },
                ScorerKind::KeyNorm,
                ScorerKind::KeyDiversity,
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| NgcError::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Reads, applies the `NGC_SEED` override and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NgcError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.apply_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| NgcError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Module configs with the experiment seed propagated.
    pub fn seeded_model(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model
        }
    }

    pub fn seeded_sft(&self) -> SftConfig {
        SftConfig {
            seed: self.seed,
            ..self.sft.clone()
        }
    }

    pub fn seeded_train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn seeded_eval(&self) -> EvalOptions {
        EvalOptions {
            seed: self.seed,
            ..self.eval.clone()
        }
    }

    fn longest_prompt(&self, percents: impl Iterator<Item = f64>) -> Result<usize> {
        let body = self.task.instance(0).body.len();
        let mut longest = body + self.task.tag_slot;
        for p in percents {
            longest = longest.max(body + tokenize(&interoception_tag(p))?.len());
        }
        Ok(longest)
    }

    /// Cross-module consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NgcError::Config(m));
        self.model.validate()?;
        self.task.validate()?;
        self.eviction.validate()?;
        self.curriculum.validate()?;
        self.sft.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return bad(format!("run_id {:?} must be a plain non-empty name", self.run_id));
        }
        if self.model.vocab != VOCAB_SIZE {
            return bad(format!("model vocab {} must equal the task vocabulary {VOCAB_SIZE}", self.model.vocab));
        }
        if self.eviction.layers != self.model.n_layers {
            return bad(format!(
                "eviction layers {} differ from model layers {}",
                self.eviction.layers, self.model.n_layers
            ));
        }
        if self.model.max_seq < self.eviction.cadence {
            return bad(format!("max_seq {} is below the cadence {}", self.model.max_seq, self.eviction.cadence));
        }
        let mut percents: Vec<f64> = self.eval_rates.iter().map(|r| r * 100.0).collect();
        percents.extend(self.curriculum.levels.iter().map(|l| (1.0 - l) * 100.0));
        percents.extend(self.sft.tag_percents.iter().copied());
        let prompt = self.longest_prompt(percents.into_iter())?;
        if prompt >= self.eviction.cadence {
            return bad(format!("prompts reach {prompt} tokens; they must stay below the cadence {}", self.eviction.cadence));
        }
        let need = prompt + self.train.max_new_tokens.max(self.eval.max_new_tokens);
        if need > self.model.max_seq {
            return bad(format!("prompt plus completion needs {need} positions, max_seq is {}", self.model.max_seq));
        }
        let reference = self.task.instance(0).reference_completion().len();
        if self.train.min_length > reference || reference > self.train.max_new_tokens {
            return bad(format!(
                "reference completion of {reference} tokens must fit between min_length {} and max_new_tokens {}",
                self.train.min_length, self.train.max_new_tokens
            ));
        }
        if let Some(m) = self.train.meta_token {
            if m >= VOCAB_SIZE {
                return bad(format!("meta token {m} outside the vocabulary"));
            }
        }
        if self.eval_instances == 0 {
            return bad("eval_instances must be positive".into());
        }
        if self.eval_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("eval rates must lie in [0, 1]".into());
        }
        for s in &self.eval_scorers {
            s.validate()?;
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}
