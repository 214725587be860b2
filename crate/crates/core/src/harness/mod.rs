//! Synthetic tasks, evaluation and reporting.

pub mod config;
pub mod eval;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod selftest;
pub mod tasks;
pub mod vocab;

pub use config::ExperimentConfig;
pub use eval::{evaluate, EvalOptions, EvalReport, EvalRow};
pub use metrics::{avg_peak_reduction, pass_at_k, PeakPair};
pub use tasks::{generate_instances, verify, Instance, TaskKind, TaskSpec};
