//! Replay masks: one masked forward pass that reproduces every next-token
//! distribution seen during an evicting rollout.
//!
//! Per layer, the trajectory splits into segments at round boundaries. A
//! query in a segment sees the previous round's survivors plus everything
//! of its own segment up to itself. Because survivors differ per layer, so
//! do the masks; and because a key can be visible to one row and gone for a
//! later one, no key-side 1D mask can express them.

use std::fmt::Write as _;

use crate::autograd::{Tape, Var};
use crate::cache::{keep_count, partition_blocks, CacheState, EvictionConfig, RetentionLog, RoundRecord};
use crate::error::{NgcError, Result};
use crate::model::{decode_step, forward_masked, AttentionMask, ModelParams, ModelVars};
use crate::scorers::ngc_block_scores_tape;

/// One visibility mask per layer for a trajectory of `size` tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayMaskSet {
    pub size: usize,
    pub layers: Vec<AttentionMask>,
}

impl ReplayMaskSet {
    /// Visible key indices of every row, for compact serialization.
    pub fn sparse_rows(&self, layer: usize) -> Vec<Vec<usize>> {
        (0..self.size).map(|r| self.layers[layer].visible_in_row(r)).collect()
    }

    /// True when some key is visible to one row and hidden from a later row.
    pub fn has_revoked_visibility(&self) -> bool {
        self.layers.iter().any(|m| {
            (0..self.size).any(|c| {
                let mut seen = false;
                (c..self.size).any(|r| {
                    let v = m.get(r, c);
                    let revoked = seen && !v;
                    seen |= v;
                    revoked
                })
            })
        })
    }
}

fn consistency(rec: &RoundRecord, msg: impl std::fmt::Display) -> NgcError {
    NgcError::Consistency(format!("layer {} round {}: {msg}", rec.layer, rec.round))
}

/// Builds per-layer masks from a retention log.
///
/// With `cadence = Some(δ)` round `j` must fire after exactly `(j+1)·δ`
/// tokens; `None` accepts any increasing boundaries.
pub fn build_replay_masks(log: &RetentionLog, size: usize, layers: usize, cadence: Option<usize>) -> Result<ReplayMaskSet> {
    if size == 0 {
        return Err(NgcError::Usage("empty trajectory".into()));
    }
    if let Some(bad) = log.records.iter().find(|r| r.layer >= layers) {
        return Err(consistency(bad, format!("layer outside a {layers}-layer model")));
    }
    let per_layer: Vec<Vec<&RoundRecord>> = (0..layers).map(|l| log.layer(l)).collect();
    let rounds = per_layer[0].len();
    if let Some(l) = per_layer.iter().position(|r| r.len() != rounds) {
        return Err(NgcError::Consistency(format!(
            "layer {l} logs {} rounds, layer 0 logs {rounds}",
            per_layer[l].len()
        )));
    }
    let mut masks = Vec::with_capacity(layers);
    for records in &per_layer {
        let mut mask = AttentionMask {
            size,
            visible: vec![false; size * size],
        };
        let mut kept: Vec<usize> = Vec::new();
        let mut seg_start = 0;
        let mut next = 0;
        for r in 0..size {
            for &c in &kept {
                mask.set(r, c, true);
            }
            for c in seg_start..=r {
                mask.set(r, c, true);
            }
            let Some(rec) = records.get(next) else { continue };
            rec.validate()?;
            if rec.round != next {
                return Err(consistency(rec, format!("expected round {next}")));
            }
            if rec.boundary() != r + 1 {
                if rec.boundary() <= r + 1 {
                    return Err(consistency(rec, format!("boundary {} is out of order", rec.boundary())));
                }
                continue;
            }
            if let Some(delta) = cadence {
                if rec.boundary() != (next + 1) * delta {
                    return Err(consistency(
                        rec,
                        format!("fired after {} tokens, cadence {delta} implies {}", rec.boundary(), (next + 1) * delta),
                    ));
                }
            }
            let alive = mask.visible_in_row(r);
            if rec.alive_indices != alive {
                return Err(consistency(rec, format!("logged alive set {:?} but replay has {alive:?}", rec.alive_indices)));
            }
            kept = rec.kept_indices();
            seg_start = r + 1;
            next += 1;
        }
        if let Some(rec) = records.get(next) {
            return Err(consistency(rec, format!("boundary {} beyond {size} tokens", rec.boundary())));
        }
        masks.push(mask);
    }
    Ok(ReplayMaskSet { size, layers: masks })
}

/// For each key position, the 1-based round that evicted it in `layer`.
pub fn eviction_rounds(log: &RetentionLog, layer: usize, size: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; size];
    for rec in log.layer(layer) {
        let kept = rec.kept_indices();
        for &i in &rec.alive_indices {
            if i < size && kept.binary_search(&i).is_err() {
                out[i] = Some(rec.round + 1);
            }
        }
    }
    out
}

fn cell(mask: &AttentionMask, evicted: &[Option<usize>], r: usize, c: usize) -> Option<usize> {
    if c > r {
        None
    } else if mask.get(r, c) {
        Some(0)
    } else {
        evicted[c]
    }
}

/// Plain-text PGM (P2) of one layer: visible keys at the maximum grey
/// level, keys evicted in round `k` at level `k`, future positions at 0.
pub fn mask_pgm(masks: &ReplayMaskSet, log: &RetentionLog, layer: usize) -> String {
    let n = masks.size;
    let rounds = log.layer(layer).len();
    let maxval = rounds + 1;
    let evicted = eviction_rounds(log, layer, n);
    let mut out = format!("P2\n{n} {n}\n{maxval}\n");
    for r in 0..n {
        let row: Vec<String> = (0..n)
            .map(|c| match cell(&masks.layers[layer], &evicted, r, c) {
                None => 0,
                Some(0) => maxval,
                Some(k) => k,
            })
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Character grid of one layer: `#` visible, `1`..`9` evicted in that
/// round (`+` beyond nine), `.` future.
pub fn mask_grid(masks: &ReplayMaskSet, log: &RetentionLog, layer: usize) -> String {
    let n = masks.size;
    let evicted = eviction_rounds(log, layer, n);
    let width = (n.max(1) - 1).to_string().len();
    let mut out = String::new();
    let _ = write!(out, "{:>w$}  ", "", w = width + 1);
    for c in 0..n {
        let _ = write!(out, "{:>width$} ", c);
    }
    out.truncate(out.trim_end().len());
    out.push('\n');
    for r in 0..n {
        let _ = write!(out, "t{:<width$}  ", r);
        for c in 0..n {
            let ch = match cell(&masks.layers[layer], &evicted, r, c) {
                None => '.',
                Some(0) => '#',
                Some(k) if k <= 9 => char::from_digit(k as u32, 10).expect("digit"),
                Some(_) => '+',
            };
            let _ = write!(out, "{:>width$} ", ch);
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}

/// Next-token logits (`T × V`, row-major) from decoding `tokens` one at a
/// time and physically applying every logged round to the cache.
pub fn incremental_logits(params: &ModelParams, tokens: &[usize], log: &RetentionLog) -> Result<Vec<f64>> {
    let layers = params.config.n_layers;
    let per_layer: Vec<Vec<&RoundRecord>> = (0..layers).map(|l| log.layer(l)).collect();
    let mut cache = CacheState::new(layers);
    let mut logits = Vec::with_capacity(tokens.len() * params.config.vocab);
    for (pos, &tok) in tokens.iter().enumerate() {
        logits.extend(decode_step(params, &mut cache, tok)?.logits);
        let round = cache.rounds_fired;
        let due: Vec<&RoundRecord> = per_layer
            .iter()
            .filter_map(|recs| recs.get(round))
            .filter(|rec| rec.boundary() == pos + 1)
            .copied()
            .collect();
        if due.is_empty() {
            continue;
        }
        if due.len() != layers {
            return Err(NgcError::Consistency(format!("round {round} logged for {} of {layers} layers", due.len())));
        }
        for rec in due {
            if cache.alive_indices(rec.layer) != rec.alive_indices {
                return Err(consistency(rec, "logged alive set differs from the physical cache"));
            }
            crate::cache::apply_retention(&mut cache, rec.layer, &rec.partition(), &rec.kept_blocks)?;
        }
        cache.complete_round();
    }
    Ok(logits)
}

/// Differentiable quantities of one replayed trajectory.
pub struct ReplayOutput<'t> {
    pub logits: Var<'t>,
    /// `C × 1` log-probabilities of the completion tokens.
    pub token_logprobs: Var<'t>,
    /// Recomputed `log p(σ | s)` per layer, per round.
    pub eviction_logprobs: Vec<Vec<Var<'t>>>,
}

/// Largest tolerated gap between a logged and a recomputed eviction
/// log-probability before the replay is declared inconsistent.
pub const LOGPROB_DRIFT_TOLERANCE: f64 = 1e-6;

/// Single masked forward pass over `tokens`, scoring completion tokens at
/// positions `prompt_len..` and, when `eviction` is given, recomputing every
/// logged round's eviction log-probability from the live queries and keys.
pub fn replay_forward<'t>(
    vars: &ModelVars<'t>,
    tokens: &[usize],
    prompt_len: usize,
    masks: &ReplayMaskSet,
    log: &RetentionLog,
    eviction: Option<&EvictionConfig>,
) -> Result<ReplayOutput<'t>> {
    if prompt_len == 0 || prompt_len > tokens.len() {
        return Err(NgcError::Usage(format!("prompt length {prompt_len} for {} tokens", tokens.len())));
    }
    if masks.size != tokens.len() {
        return Err(NgcError::Dimension(format!("masks for {} tokens, trajectory has {}", masks.size, tokens.len())));
    }
    let fwd = forward_masked(vars, tokens, &masks.layers)?;
    let tape: &'t Tape = fwd.logits.tape();
    let token_logprobs = if prompt_len < tokens.len() {
        let rows: Vec<usize> = (prompt_len - 1..tokens.len() - 1).collect();
        fwd.logits
            .gather_rows(&rows)?
            .log_softmax_lastdim()?
            .pick_per_row(&tokens[prompt_len..])?
    } else {
        tape.leaf(vec![], 0, 1, false)?
    };
    let n_layers = vars.config.n_layers;
    let mut eviction_logprobs = vec![Vec::new(); n_layers];
    if let Some(ev) = eviction {
        for (layer, out) in eviction_logprobs.iter_mut().enumerate() {
            for rec in log.layer(layer) {
                let boundary = rec.boundary();
                let alive = masks.layers[layer].visible_in_row(boundary - 1);
                if alive != rec.alive_indices {
                    return Err(consistency(rec, "recomputed candidate set differs from the log"));
                }
                let candidates = alive.len().saturating_sub(ev.window);
                let partition = partition_blocks(candidates, ev.block_size)?;
                if partition.sizes != rec.block_sizes {
                    return Err(consistency(rec, format!("partition {:?} expected {:?}", rec.block_sizes, partition.sizes)));
                }
                if rec.kept_blocks.len() != keep_count(partition.len(), ev.rate) {
                    return Err(consistency(rec, "kept block count disagrees with the eviction rate"));
                }
                if boundary < ev.window {
                    return Err(consistency(rec, "round fired before the scoring window filled"));
                }
                let qrows: Vec<usize> = (boundary - ev.window..boundary).collect();
                let q = fwd.trace.queries[layer].gather_rows(&qrows)?;
                let k = fwd.trace.keys[layer].gather_rows(&alive[..candidates])?;
                let scores = ngc_block_scores_tape(&q, &k, &partition, vars.config.n_heads)?;
                let lp = scores.sequence_logprob(&rec.kept_blocks)?;
                if let Some(logged) = rec.logprob {
                    if (lp.item() - logged).abs() > LOGPROB_DRIFT_TOLERANCE * logged.abs().max(1.0) {
                        return Err(consistency(rec, format!("recomputed log-probability {} vs logged {logged}", lp.item())));
                    }
                }
                out.push(lp);
            }
        }
    }
    Ok(ReplayOutput {
        logits: fwd.logits,
        token_logprobs,
        eviction_logprobs,
    })
}

/// Token count of [`example_log`].
pub const EXAMPLE_SIZE: usize = 10;

/// Ten-token, single-layer example with token-sized blocks and rounds
/// after `t4` and `t7`.
pub fn example_log() -> RetentionLog {
    let mut log = RetentionLog::default();
    log.push(RoundRecord {
        layer: 0,
        round: 0,
        alive_indices: vec![0, 1, 2, 3, 4],
        block_sizes: vec![1; 4],
        kept_blocks: vec![0, 2],
        logprob: None,
    });
    log.push(RoundRecord {
        layer: 0,
        round: 1,
        alive_indices: vec![0, 2, 4, 5, 6, 7],
        block_sizes: vec![1; 5],
        kept_blocks: vec![0, 2, 4],
        logprob: None,
    });
    log
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_log() -> RetentionLog {
        example_log()
    }

    #[test]
    fn empty_log_is_causal() {
        let m = build_replay_masks(&RetentionLog::default(), 6, 2, Some(4)).unwrap();
        assert_eq!(m.layers[1], AttentionMask::causal(6));
        assert!(!m.has_revoked_visibility());
    }

    #[test]
    fn example_rows() {
        let m = build_replay_masks(&fixture_log(), 10, 1, None).unwrap();
        let l = &m.layers[0];
        for r in 0..5 {
            assert_eq!(l.visible_in_row(r), (0..=r).collect::<Vec<_>>());
        }
        assert_eq!(l.visible_in_row(5), vec![0, 2, 4, 5]);
        assert_eq!(l.visible_in_row(6), vec![0, 2, 4, 5, 6]);
        assert_eq!(l.visible_in_row(8), vec![0, 4, 6, 7, 8]);
        assert_eq!(l.visible_in_row(9), vec![0, 4, 6, 7, 8, 9]);
        assert!(m.has_revoked_visibility());
    }

    #[test]
    fn example_grid_text() {
        let log = fixture_log();
        let m = build_replay_masks(&log, 10, 1, None).unwrap();
        let grid = mask_grid(&m, &log, 0);
        let rows: Vec<&str> = grid.lines().skip(1).collect();
        assert_eq!(rows[0], "t0  # . . . . . . . . .");
        assert_eq!(rows[5], "t5  # 1 # 1 # # . . . .");
        assert_eq!(rows[8], "t8  # 1 2 1 # 2 # # # .");
        let pgm = mask_pgm(&m, &log, 0);
        assert!(pgm.starts_with("P2\n10 10\n3\n3 0 0"));
    }

    #[test]
    fn cadence_and_alive_mismatch_are_reported() {
        let log = fixture_log();
        let err = build_replay_masks(&log, 10, 1, Some(5)).unwrap_err();
        assert!(matches!(&err, NgcError::Consistency(m) if m.contains("round 1")), "{err}");
        let mut bad = log.clone();
        bad.records[1].alive_indices = vec![0, 1, 2, 4, 5, 6, 7];
        bad.records[1].block_sizes = vec![1; 6];
        let err = build_replay_masks(&bad, 10, 1, None).unwrap_err();
        assert!(matches!(&err, NgcError::Consistency(m) if m.contains("layer 0 round 1")));
        assert!(build_replay_masks(&log, 7, 1, None).is_err());
    }

    #[test]
    fn permanence_of_evicted_keys() {
        let m = build_replay_masks(&fixture_log(), 10, 1, None).unwrap();
        let l = &m.layers[0];
        for r in 1..5 {
            assert!(l.get(r, 1));
        }
        for r in 5..10 {
            assert!(!l.get(r, 1) && !l.get(r, 3));
        }
    }
}
