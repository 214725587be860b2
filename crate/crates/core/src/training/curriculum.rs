use serde::{Deserialize, Serialize};

use crate::error::{NgcError, Result};

/// Staircase over the retention rate `p₀ = 1 − ε`.
///
/// Stage `ℓ` holds `levels[ℓ]` for the first `1 − α` of its `steps_per_stage`
/// steps, then blends linearly toward `levels[ℓ+1]`. The last level holds
/// forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub levels: Vec<f64>,
    pub steps_per_stage: u64,
    pub alpha: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            levels: vec![1.0, 0.75, 0.5],
            steps_per_stage: 100,
            alpha: 0.6,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(NgcError::Config("curriculum needs at least one level".into()));
        }
        if self.levels.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(NgcError::Config("retention levels must lie in (0, 1]".into()));
        }
        if self.levels.windows(2).any(|w| w[1] > w[0]) {
            return Err(NgcError::Config("retention levels must be nonincreasing".into()));
        }
        if self.steps_per_stage == 0 {
            return Err(NgcError::Config("steps_per_stage must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(NgcError::Config("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn final_stage(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn stage(&self, step: u64) -> usize {
        ((step / self.steps_per_stage) as usize).min(self.final_stage())
    }
}

/// Retention rate `p₀(t)` at training step `t`.
pub fn curriculum_rate(step: u64, config: &CurriculumConfig) -> f64 {
    let stage = config.stage(step);
    if stage == config.final_stage() {
        return config.levels[stage];
    }
    let s = (step % config.steps_per_stage) as f64 / config.steps_per_stage as f64;
    let here = config.levels[stage];
    if s < 1.0 - config.alpha {
        here
    } else {
        let next = config.levels[stage + 1];
        here + (s - (1.0 - config.alpha)) / config.alpha * (next - here)
    }
}

/// Tag announcing the eviction rate, in percent, to the model.
pub fn interoception_tag(percent: f64) -> String {
    let rounded = (percent * 1e6).round() / 1e6;
    format!("<eviction_rate>{rounded}%</eviction_rate>")
}
