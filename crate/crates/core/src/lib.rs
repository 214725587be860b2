//! Learned KV-cache eviction trained jointly with generation.
//!
//! A small decoder-only transformer generates under a grow-then-evict cache.
//! Each eviction round the model scores blocks of its own cache from recent
//! attention and samples which to keep; replay masks then reproduce exactly
//! what every token saw, so one policy gradient trains both decisions.

pub mod autograd;
pub mod cache;
pub mod error;
pub mod harness;
pub mod model;
pub mod replay;
pub mod rollout;
pub mod sampler;
pub mod scorers;
pub mod training;

pub use cache::{EvictionConfig, RetentionLog, RoundRecord};
pub use error::{NgcError, Result};
pub use model::{ModelConfig, ModelParams};
pub use rollout::{EvictionPolicy, RolloutConfig, Trajectory};
pub use scorers::ScorerKind;
