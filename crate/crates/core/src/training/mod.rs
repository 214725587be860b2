//! Joint policy-gradient training of tokens and evictions.
//!
//! A step samples `G` rollouts per prompt at the curriculum's current rate,
//! scores them with the task verifier, centers rewards within each group and
//! replays every trajectory in one masked pass. The token term and the
//! eviction term share one backward pass and one optimizer step.

pub mod curriculum;
pub mod losses;
pub mod optimizer;
pub mod sft;
pub mod trainer;

pub use crate::rollout::force_meta_token;
pub use curriculum::{curriculum_rate, interoception_tag, CurriculumConfig};
pub use losses::{apply_min_length_penalty, group_advantages, mem_loss, token_loss, total_loss};
pub use optimizer::{optimizer_step, AdamW, OptimizerConfig};
pub use sft::{completion_cross_entropy, sft_warm_start, SftConfig};
pub use trainer::{
    batch_loss, build_prompt, sample_groups, score, train_loop, trajectory_loss, write_metrics_csv, BatchLoss, LossGroup,
    RolloutGroup, StepMetrics, TrainConfig, TrainMode, EVAL_INDEX_OFFSET, METRICS_HEADER,
};
