//! Key importance scores and block logits.
//!
//! The learned policy scores every candidate key by the attention it
//! receives from the `w` most recent queries, averaged over heads and
//! queries, then averages those scores within each block. The baselines
//! below are block-granular re-implementations of well-known heuristics,
//! not reference code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autograd::kernels::{dot, softmax_in_place};
use crate::autograd::{Tape, Var};
use crate::cache::BlockPartition;
use crate::error::{NgcError, Result};
use crate::sampler::greedy_topk;

/// Per-key importance `ψ` and validity `m` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyScores {
    pub psi: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Block logits for one layer; `-inf` marks a block with no valid key.
pub type BlockScores = Vec<f64>;

fn check_inputs(queries: &[Vec<f64>], keys: &[Vec<f64>], n_heads: usize, d_head: usize) -> Result<()> {
    if keys.is_empty() {
        return Err(NgcError::Usage("no candidate keys to score".into()));
    }
    if queries.is_empty() {
        return Err(NgcError::Usage("no queries to score with".into()));
    }
    let width = n_heads * d_head;
    if let Some(v) = queries.iter().chain(keys).find(|v| v.len() != width) {
        return Err(NgcError::Dimension(format!(
            "vector of width {} for {n_heads} heads of {d_head}",
            v.len()
        )));
    }
    Ok(())
}

/// `ψ_t = 1/(H·w) Σ_h Σ_q softmax_t(q_h · k_{t,h} / sqrt(d_h))`, softmax over
/// the candidate keys only. Every candidate is valid.
pub fn ngc_key_scores(queries: &[Vec<f64>], keys: &[Vec<f64>], n_heads: usize, d_head: usize) -> Result<KeyScores> {
    check_inputs(queries, keys, n_heads, d_head)?;
    let n = keys.len();
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut psi = vec![0.0; n];
    for h in 0..n_heads {
        let cols = h * d_head..(h + 1) * d_head;
        let mut head = vec![0.0; n];
        for q in queries {
            let mut row: Vec<f64> = keys.iter().map(|k| dot(&q[cols.clone()], &k[cols.clone()]) * scale).collect();
            softmax_in_place(&mut row);
            head.iter_mut().zip(&row).for_each(|(a, b)| *a += b);
        }
        if h == 0 {
            psi = head;
        } else {
            psi.iter_mut().zip(&head).for_each(|(a, b)| *a += b);
        }
    }
    let c = 1.0 / (n_heads * queries.len()) as f64;
    psi.iter_mut().for_each(|v| *v *= c);
    Ok(KeyScores {
        psi,
        valid: vec![true; n],
    })
}

/// Masked mean of `ψ` over each block.
pub fn aggregate_blocks(scores: &KeyScores, partition: &BlockPartition) -> Result<BlockScores> {
    if scores.psi.len() != partition.covered() || scores.valid.len() != scores.psi.len() {
        return Err(NgcError::Dimension(format!(
            "{} key scores for a partition covering {}",
            scores.psi.len(),
            partition.covered()
        )));
    }
    Ok(partition
        .ranges()
        .into_iter()
        .map(|r| {
            let count = scores.valid[r.clone()].iter().filter(|&&m| m).count();
            if count == 0 {
                return f64::NEG_INFINITY;
            }
            let inv = 1.0 / count as f64;
            scores.psi[r.clone()]
                .iter()
                .zip(&scores.valid[r])
                .filter(|(_, &m)| m)
                .map(|(p, _)| p * inv)
                .sum()
        })
        .collect())
}

/// Differentiable block logits from `w × d_model` queries and `N × d_model`
/// candidate keys on a tape. Returns a `1 × n_blocks` node.
pub fn ngc_block_scores_tape<'t>(
    queries: &Var<'t>,
    keys: &Var<'t>,
    partition: &BlockPartition,
    n_heads: usize,
) -> Result<Var<'t>> {
    let (w, width) = queries.shape();
    let (n, kwidth) = keys.shape();
    if width != kwidth || width % n_heads != 0 {
        return Err(NgcError::Dimension(format!(
            "queries {w}x{width}, keys {n}x{kwidth}, {n_heads} heads"
        )));
    }
    if n != partition.covered() {
        return Err(NgcError::Dimension(format!("{n} keys for a partition covering {}", partition.covered())));
    }
    let d_head = width / n_heads;
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut psi: Option<Var<'t>> = None;
    for h in 0..n_heads {
        let qh = queries.slice_cols(h * d_head, d_head)?;
        let kh = keys.slice_cols(h * d_head, d_head)?;
        let head = qh.matmul_nt(&kh)?.scale(scale)?.softmax_lastdim()?.sum_rows()?;
        psi = Some(match psi {
            None => head,
            Some(acc) => acc.add(&head)?,
        });
    }
    let psi = psi.expect("at least one head").scale(1.0 / (n_heads * w) as f64)?;
    let nb = partition.len();
    let mut avg = vec![0.0; n * nb];
    for (b, r) in partition.ranges().into_iter().enumerate() {
        let inv = 1.0 / r.len() as f64;
        for t in r {
            avg[t * nb + b] = inv;
        }
    }
    let tape: &'t Tape = queries.tape();
    psi.matmul(&tape.leaf(avg, n, nb, false)?)
}

/// Eviction policy selectable at evaluation time. Serialized in its
/// textual form, e.g. `"streaming:4:8"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScorerKind {
    /// The model's own attention scores (sampled in training, greedy at eval).
    NgcAttention,
    /// Attention sinks plus most recent blocks.
    StreamingWindow { n_sink: usize, window: usize },
    /// Attention scores from the last `observation` queries, greedy.
    SnapAttention { observation: usize },
    /// Prefer keys with small L2 norm.
    KeyNorm,
    /// Prefer blocks whose mean key is least similar to the others.
    KeyDiversity,
}

pub const DEFAULT_SINK_TOKENS: usize = 4;

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::NgcAttention => "ngc",
            ScorerKind::StreamingWindow { .. } => "streaming",
            ScorerKind::SnapAttention { .. } => "snap",
            ScorerKind::KeyNorm => "keynorm",
            ScorerKind::KeyDiversity => "keydiff",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScorerKind::StreamingWindow { n_sink, window } if n_sink == 0 || window == 0 => {
                Err(NgcError::Config("streaming sink and window must be positive".into()))
            }
            ScorerKind::SnapAttention { observation: 0 } => {
                Err(NgcError::Config("snap observation window must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of most recent queries the scorer needs.
    pub fn query_window(&self, w: usize) -> usize {
        match *self {
            ScorerKind::SnapAttention { observation } => observation.max(w),
            _ => w,
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerKind::StreamingWindow { n_sink, window: usize::MAX } if *n_sink == DEFAULT_SINK_TOKENS => {
                f.write_str("streaming")
            }
            ScorerKind::StreamingWindow { n_sink, window: usize::MAX } => write!(f, "streaming:{n_sink}"),
            ScorerKind::StreamingWindow { n_sink, window } => write!(f, "streaming:{n_sink}:{window}"),
            ScorerKind::SnapAttention { observation } => write!(f, "snap:{observation}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ScorerKind {
    type Err = NgcError;

    /// `ngc`, `streaming[:n_sink[:window]]`, `snap[:observation]`, `keynorm`, `keydiff`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let nums: Vec<usize> = parts
            .map(|p| {
                p.parse()
                    .map_err(|_| NgcError::Config(format!("bad scorer parameter {p:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        let arg = |i: usize, default: usize| nums.get(i).copied().unwrap_or(default);
        let kind = match (head, nums.len()) {
            ("ngc", 0) => ScorerKind::NgcAttention,
            ("streaming", 0..=2) => ScorerKind::StreamingWindow {
                n_sink: arg(0, DEFAULT_SINK_TOKENS),
                window: arg(1, usize::MAX),
            },
            ("snap", 0..=1) => ScorerKind::SnapAttention { observation: arg(0, 8) },
            ("keynorm", 0) => ScorerKind::KeyNorm,
            ("keydiff", 0) => ScorerKind::KeyDiversity,
            _ => return Err(NgcError::Config(format!("unknown scorer {s:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl TryFrom<String> for ScorerKind {
    type Error = NgcError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScorerKind> for String {
    fn from(k: ScorerKind) -> String {
        k.to_string()
    }
}

/// Inputs available to a scorer for one layer in one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    /// Candidate keys in alive order.
    pub keys: &'a [Vec<f64>],
    /// Most recent queries, oldest first.
    pub queries: &'a [Vec<f64>],
    pub partition: &'a BlockPartition,
    /// Scoring window `w`.
    pub window: usize,
    pub keep: usize,
    pub n_heads: usize,
    pub d_head: usize,
}

fn last<T>(items: &[T], n: usize) -> &[T] {
    &items[items.len().saturating_sub(n)..]
}

fn block_means(keys: &[Vec<f64>], partition: &BlockPartition) -> Vec<Vec<f64>> {
    partition
        .ranges()
        .into_iter()
        .map(|r| {
            let inv = 1.0 / r.len() as f64;
            let mut m = vec![0.0; keys[0].len()];
            for k in &keys[r] {
                m.iter_mut().zip(k).for_each(|(a, b)| *a += b * inv);
            }
            m
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Block logits the scorer ranks by; higher is kept first.
/// `StreamingWindow` has no scores and returns `None`.
pub fn block_scores(kind: &ScorerKind, ctx: &RoundContext<'_>) -> Result<Option<BlockScores>> {
    if ctx.keys.len() != ctx.partition.covered() {
        return Err(NgcError::Dimension(format!(
            "{} keys for a partition covering {}",
            ctx.keys.len(),
            ctx.partition.covered()
        )));
    }
    let ranges = ctx.partition.ranges();
    let scores = match *kind {
        ScorerKind::NgcAttention => {
            let ks = ngc_key_scores(last(ctx.queries, ctx.window), ctx.keys, ctx.n_heads, ctx.d_head)?;
            aggregate_blocks(&ks, ctx.partition)?
        }
        ScorerKind::SnapAttention { observation } => {
            let ks = ngc_key_scores(last(ctx.queries, observation), ctx.keys, ctx.n_heads, ctx.d_head)?;
            aggregate_blocks(&ks, ctx.partition)?
        }
        ScorerKind::KeyNorm => ranges
            .iter()
            .map(|r| -ctx.keys[r.clone()].iter().map(|k| norm(k)).sum::<f64>() / r.len() as f64)
            .collect(),
        ScorerKind::KeyDiversity => {
            let means = block_means(ctx.keys, ctx.partition);
            (0..means.len())
                .map(|i| {
                    let max_cos = (0..means.len())
                        .filter(|&j| j != i)
                        .map(|j| {
                            let denom = norm(&means[i]) * norm(&means[j]);
                            if denom > 0.0 {
                                dot(&means[i], &means[j]) / denom
                            } else {
                                0.0
                            }
                        })
                        .fold(f64::NEG_INFINITY, f64::max);
                    if max_cos.is_finite() {
                        -max_cos
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        ScorerKind::StreamingWindow { .. } => return Ok(None),
    };
    Ok(Some(scores))
}

/// Deterministic keep set of exactly `ctx.keep` blocks for one layer.
pub fn baseline_keep_set(kind: &ScorerKind, ctx: &RoundContext<'_>) -> Result<Vec<usize>> {
    let n = ctx.partition.len();
    if ctx.keep > n || ctx.keep == 0 {
        return Err(NgcError::Usage(format!("cannot keep {} of {n} blocks", ctx.keep)));
    }
    match *kind {
        ScorerKind::StreamingWindow { n_sink, window } => {
            let ranges = ctx.partition.ranges();
            let covered = ctx.partition.covered();
            let recent_from = covered.saturating_sub(window);
            let is_sink = |b: usize| ranges[b].start < n_sink;
            let is_recent = |b: usize| ranges[b].end > recent_from;
            // Sinks, then the recency window newest first, then the middle newest first.
            let mut order: Vec<usize> = (0..n).filter(|&b| is_sink(b)).collect();
            order.extend((0..n).rev().filter(|&b| !is_sink(b) && is_recent(b)));
            order.extend((0..n).rev().filter(|&b| !is_sink(b) && !is_recent(b)));
            order.truncate(ctx.keep);
            Ok(order)
        }
        _ => {
            let scores = block_scores(kind, ctx)?.expect("scored policy");
            greedy_topk(&scores, ctx.keep)
        }
    }
}
