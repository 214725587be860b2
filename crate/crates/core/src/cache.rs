//! Grow-then-evict cache dynamics.
//!
//! Every `cadence` tokens an eviction round fires. Each layer's alive
//! entries, minus the `window` most recent ones (whose queries do the
//! scoring), are cut into contiguous blocks of `block_size`; the layer keeps
//! `K = keep_count(N, rate)` of those `N` blocks and drops the rest for good.
//! Layers choose independently but always keep the same number of blocks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NgcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvictionConfig {
    /// Tokens between eviction rounds (δ).
    pub cadence: usize,
    /// Fraction of blocks removed per round (ε).
    pub rate: f64,
    pub block_size: usize,
    /// Number of most recent queries used for scoring (w).
    pub window: usize,
    pub layers: usize,
}

impl EvictionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cadence < 1 {
            return Err(NgcError::Config("cadence must be at least 1".into()));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(NgcError::Config(format!("eviction rate {} outside (0, 1]", self.rate)));
        }
        if self.block_size < 1 || self.block_size > self.cadence {
            return Err(NgcError::Config(format!(
                "block size {} must lie in [1, cadence={}]",
                self.block_size, self.cadence
            )));
        }
        if self.window < 1 || self.window >= self.cadence {
            return Err(NgcError::Config(format!(
                "scoring window {} must lie in [1, cadence={})",
                self.window, self.cadence
            )));
        }
        if self.layers < 1 {
            return Err(NgcError::Config("at least one layer required".into()));
        }
        Ok(())
    }

    pub fn with_rate(self, rate: f64) -> Self {
        Self { rate, ..self }
    }
}

/// One alive key/value pair. Keys are stored post-rotary, exactly as the
/// attention layer consumes them.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub global_index: usize,
    pub key: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheState {
    pub layers: Vec<Vec<CacheEntry>>,
    pub tokens_seen_total: usize,
    pub tokens_since_round: usize,
    pub rounds_fired: usize,
    /// Largest alive count any single layer has reached.
    pub peak_entries_per_layer: usize,
    /// Largest alive count summed over layers.
    pub peak_entries_total: usize,
}

impl CacheState {
    pub fn new(layers: usize) -> Self {
        Self {
            layers: vec![Vec::new(); layers],
            tokens_seen_total: 0,
            tokens_since_round: 0,
            rounds_fired: 0,
            peak_entries_per_layer: 0,
            peak_entries_total: 0,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn alive_count(&self, layer: usize) -> usize {
        self.layers[layer].len()
    }

    pub fn total_alive(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn alive_indices(&self, layer: usize) -> Vec<usize> {
        self.layers[layer].iter().map(|e| e.global_index).collect()
    }

    /// Appends one entry per layer for the token at `tokens_seen_total` and
    /// advances the counters.
    pub fn push_token(&mut self, entries: Vec<(Vec<f64>, Vec<f64>)>) -> Result<()> {
        if entries.len() != self.layers.len() {
            return Err(NgcError::State(format!(
                "{} layer entries for a {}-layer cache",
                entries.len(),
                self.layers.len()
            )));
        }
        let index = self.tokens_seen_total;
        for (layer, (key, value)) in self.layers.iter_mut().zip(entries) {
            layer.push(CacheEntry {
                global_index: index,
                key,
                value,
            });
        }
        self.tokens_seen_total += 1;
        self.tokens_since_round += 1;
        self.update_peak();
        Ok(())
    }

    fn update_peak(&mut self) {
        let per_layer = self.layers.iter().map(Vec::len).max().unwrap_or(0);
        self.peak_entries_per_layer = self.peak_entries_per_layer.max(per_layer);
        self.peak_entries_total = self.peak_entries_total.max(self.total_alive());
    }

    /// Checks ordering and the equal-layer-count invariant of a healthy cache.
    pub fn check(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.windows(2).any(|w| w[0].global_index >= w[1].global_index) {
                return Err(NgcError::State(format!("layer {l} alive list is not strictly increasing")));
            }
        }
        Ok(())
    }

    /// Marks the end of an eviction round across all layers.
    pub fn complete_round(&mut self) {
        self.tokens_since_round = 0;
        self.rounds_fired += 1;
    }
}

/// Whether an eviction round fires now.
pub fn should_fire(state: &CacheState, config: &EvictionConfig) -> bool {
    if state.rounds_fired == 0 {
        state.tokens_seen_total >= config.cadence
    } else {
        state.tokens_since_round >= config.cadence
    }
}

/// Contiguous blocks over the current alive order of one layer's candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn covered(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Position range (within the alive list) of every block.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }
}

/// `⌈count / block_size⌉` blocks of `block_size`, the last possibly shorter.
pub fn partition_blocks(count: usize, block_size: usize) -> Result<BlockPartition> {
    if count == 0 {
        return Err(NgcError::Usage("cannot partition zero entries".into()));
    }
    if block_size == 0 {
        return Err(NgcError::Usage("block size must be positive".into()));
    }
    let n = count.div_ceil(block_size);
    let mut sizes = vec![block_size; n];
    sizes[n - 1] = count - block_size * (n - 1);
    Ok(BlockPartition { sizes })
}

/// Blocks kept out of `n`: `max(1, round_half_up((1 − rate)·n))`.
pub fn keep_count(n: usize, rate: f64) -> usize {
    let exact = (1.0 - rate) * n as f64;
    // Guard the half-way case against representation error such as 0.5·3 = 1.4999….
    let rounded = (exact + 0.5 + 1e-9).floor() as usize;
    rounded.clamp(1, n.max(1))
}

/// Replaces layer `layer`'s candidates with the kept blocks.
///
/// Entries past `partition.covered()` (the scoring window) always survive.
/// Returns the evicted global indices.
pub fn apply_retention(
    state: &mut CacheState,
    layer: usize,
    partition: &BlockPartition,
    kept: &[usize],
) -> Result<Vec<usize>> {
    if layer >= state.layers.len() {
        return Err(NgcError::Usage(format!("layer {layer} of {}", state.layers.len())));
    }
    if kept.is_empty() {
        return Err(NgcError::Usage("a round must keep at least one block".into()));
    }
    let mut flags = vec![false; partition.len()];
    for &b in kept {
        if b >= partition.len() {
            return Err(NgcError::Usage(format!("block {b} of {}", partition.len())));
        }
        if flags[b] {
            return Err(NgcError::Usage(format!("block {b} kept twice")));
        }
        flags[b] = true;
    }
    let entries = &mut state.layers[layer];
    if partition.covered() > entries.len() {
        return Err(NgcError::State(format!(
            "partition covers {} entries but layer {layer} holds {}",
            partition.covered(),
            entries.len()
        )));
    }
    let old = std::mem::take(entries);
    let mut evicted = Vec::new();
    let ranges = partition.ranges();
    let mut block_of = Vec::with_capacity(old.len());
    for (b, r) in ranges.iter().enumerate() {
        block_of.extend(std::iter::repeat(Some(b)).take(r.len()));
    }
    block_of.resize(old.len(), None);
    for (entry, block) in old.into_iter().zip(block_of) {
        match block {
            Some(b) if !flags[b] => evicted.push(entry.global_index),
            _ => entries.push(entry),
        }
    }
    Ok(evicted)
}

/// Fixed point `layers · cadence / rate` of the pre-round cache size.
pub fn steady_state_size(cadence: usize, rate: f64, layers: usize) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(NgcError::Domain(format!(
            "eviction rate {rate} gives no bounded steady state"
        )));
    }
    Ok(layers as f64 * cadence as f64 / rate)
}

/// Alive count of one layer after a round that starts with `alive` entries.
///
/// Sizes only depend on whether the short trailing block survives; the
/// simulation keeps the newest `K` blocks, which includes it.
pub fn surviving_after_round(alive: usize, rate: f64, config: &EvictionConfig) -> usize {
    let candidates = alive.saturating_sub(config.window);
    if candidates == 0 {
        return alive;
    }
    let partition = partition_blocks(candidates, config.block_size).expect("non-empty");
    let k = keep_count(partition.len(), rate);
    let kept: usize = partition.sizes[partition.len() - k..].iter().sum();
    kept + (alive - candidates)
}

/// Per-layer cache size immediately before each of the first `rounds`
/// rounds, for a prompt of `prompt` tokens and unbounded generation.
pub fn pre_round_sizes(prompt: usize, rounds: usize, rate: f64, config: &EvictionConfig) -> Vec<usize> {
    let mut out = Vec::with_capacity(rounds);
    let mut alive = prompt.max(config.cadence);
    for _ in 0..rounds {
        out.push(alive);
        alive = surviving_after_round(alive, rate, config) + config.cadence;
    }
    out
}

/// Maximum number of entries (summed over layers) held at any point while
/// generating `completion` tokens after a `prompt`-token prefill.
///
/// `rate == 0` disables eviction and yields `layers · (prompt + completion)`.
pub fn peak_occupancy(prompt: usize, completion: usize, rate: f64, config: &EvictionConfig) -> usize {
    let mut alive = 0usize;
    let mut seen = 0usize;
    let mut since = 0usize;
    let mut rounds = 0usize;
    let mut peak = 0usize;
    for _ in 0..prompt + completion {
        alive += 1;
        seen += 1;
        since += 1;
        peak = peak.max(alive);
        let fire = if rounds == 0 { seen >= config.cadence } else { since >= config.cadence };
        if rate > 0.0 && fire {
            alive = surviving_after_round(alive, rate, config);
            since = 0;
            rounds += 1;
        }
    }
    config.layers * peak
}

/// One layer's decision in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub layer: usize,
    pub round: usize,
    /// Alive global indices at round start, including the scoring window.
    pub alive_indices: Vec<usize>,
    /// Partition of the candidates (the alive list minus the window).
    pub block_sizes: Vec<usize>,
    /// Kept block ids in selection order.
    pub kept_blocks: Vec<usize>,
    /// Log-probability of `kept_blocks` under the scores in force, when the
    /// policy defines one.
    pub logprob: Option<f64>,
}

impl RoundRecord {
    pub fn partition(&self) -> BlockPartition {
        BlockPartition {
            sizes: self.block_sizes.clone(),
        }
    }

    pub fn candidate_count(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Global indices alive after the round, ascending.
    pub fn kept_indices(&self) -> Vec<usize> {
        let ranges = self.partition().ranges();
        let mut keep = vec![false; self.alive_indices.len()];
        for &b in &self.kept_blocks {
            if let Some(r) = ranges.get(b) {
                keep[r.clone()].iter_mut().for_each(|k| *k = true);
            }
        }
        let tail = self.candidate_count().min(keep.len());
        keep[tail..]
            .iter_mut()
            .for_each(|k| *k = true);
        self.alive_indices
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(i, _)| *i)
            .collect()
    }

    /// Position after which this round fired.
    pub fn boundary(&self) -> usize {
        self.alive_indices.last().map_or(0, |&i| i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("layer {} round {}", self.layer, self.round);
        if self.candidate_count() > self.alive_indices.len() {
            return Err(NgcError::Consistency(format!("{}: blocks cover more than the alive set", ctx())));
        }
        if self.alive_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NgcError::Consistency(format!("{}: alive indices not increasing", ctx())));
        }
        let mut seen = vec![false; self.block_sizes.len()];
        for &b in &self.kept_blocks {
            if b >= seen.len() || seen[b] {
                return Err(NgcError::Consistency(format!("{}: invalid kept block {b}", ctx())));
            }
            seen[b] = true;
        }
        if self.kept_blocks.is_empty() {
            return Err(NgcError::Consistency(format!("{}: no kept blocks", ctx())));
        }
        if let Some(lp) = self.logprob {
            if !lp.is_finite() || lp > 0.0 {
                return Err(NgcError::Consistency(format!("{}: bad log-probability {lp}", ctx())));
            }
        }
        Ok(())
    }
}

/// Every eviction decision of one trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetentionLog {
    pub records: Vec<RoundRecord>,
}

impl RetentionLog {
    pub fn push(&mut self, record: RoundRecord) {
        self.records.push(record);
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_rounds(&self) -> usize {
        self.records.iter().map(|r| r.round + 1).max().unwrap_or(0)
    }

    /// Records of one layer, ordered by round.
    pub fn layer(&self, layer: usize) -> Vec<&RoundRecord> {
        let mut out: Vec<&RoundRecord> = self.records.iter().filter(|r| r.layer == layer).collect();
        out.sort_by_key(|r| r.round);
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RoundRecord = serde_json::from_str(&line)
                .map_err(|e| NgcError::Load(format!("retention log line {}: {e}", n + 1)))?;
            record.validate()?;
            records.push(record);
        }
        Ok(Self { records })
    }
}
