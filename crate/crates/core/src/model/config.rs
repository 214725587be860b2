use serde::{Deserialize, Serialize};

use crate::error::{NgcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub vocab: usize,
    pub max_seq: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn d_hidden(&self) -> usize {
        4 * self.d_model
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 {
            return Err(NgcError::Config("layers, heads and width must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(NgcError::Config(format!(
                "{} heads do not divide width {}",
                self.n_heads, self.d_model
            )));
        }
        if self.d_head() % 2 != 0 {
            return Err(NgcError::Config(format!(
                "head width {} must be even for rotary embeddings",
                self.d_head()
            )));
        }
        if self.vocab < 8 {
            return Err(NgcError::Config(format!("vocabulary of {} is below 8", self.vocab)));
        }
        if self.max_seq == 0 {
            return Err(NgcError::Config("max_seq must be positive".into()));
        }
        Ok(())
    }
}
