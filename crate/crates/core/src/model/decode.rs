use super::forward::check_tokens;
use super::ModelParams;
use crate::autograd::kernels::{self, gelu, matmul, rmsnorm_row, rope_row, vecmat};
use crate::cache::CacheState;
use crate::error::{NgcError, Result};

/// Result of one incremental step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Next-token logits (length `V`).
    pub logits: Vec<f64>,
    /// Post-rotary query of this token per layer (length `d_model`).
    pub queries: Vec<Vec<f64>>,
}

/// Runs one token through the model against the alive cache entries plus
/// itself, then appends its keys and values to every layer.
///
/// Uses the same slice kernels as the taped forward pass, so a masked
/// forward with the equivalent visibility reproduces these logits.
pub fn decode_step(params: &ModelParams, cache: &mut CacheState, token: usize) -> Result<DecodeOutput> {
    let cfg = params.config;
    check_tokens(&[token], cfg.vocab, usize::MAX)?;
    if cache.n_layers() != cfg.n_layers {
        return Err(NgcError::State(format!(
            "cache has {} layers, model has {}",
            cache.n_layers(),
            cfg.n_layers
        )));
    }
    let position = cache.tokens_seen_total;
    if position >= cfg.max_seq {
        return Err(NgcError::Dimension(format!("position {position} beyond max_seq {}", cfg.max_seq)));
    }
    let d = cfg.d_model;
    let dh = cfg.d_head();
    let scale = 1.0 / (dh as f64).sqrt();

    let mut x = params.embed.row(token).to_vec();
    let mut queries = Vec::with_capacity(cfg.n_layers);
    let mut new_entries = Vec::with_capacity(cfg.n_layers);
    for (l, lp) in params.layers.iter().enumerate() {
        let alive = &cache.layers[l];
        if let Some(e) = alive.iter().find(|e| e.key.len() != d || e.value.len() != d) {
            return Err(NgcError::State(format!(
                "layer {l} entry {} has width {}/{} for d_model {d}",
                e.global_index,
                e.key.len(),
                e.value.len()
            )));
        }
        if alive.last().is_some_and(|e| e.global_index >= position) {
            return Err(NgcError::State(format!("layer {l} holds entries at or after position {position}")));
        }
        let h = rmsnorm_row(&x, &lp.attn_norm.values);
        let mut q = vecmat(&h, &lp.wq.values, d);
        let mut k = vecmat(&h, &lp.wk.values, d);
        let v = vecmat(&h, &lp.wv.values, d);
        rope_row(&mut q, position, dh, 1.0);
        rope_row(&mut k, position, dh, 1.0);

        let n = alive.len() + 1;
        let mut heads = Vec::with_capacity(d);
        for hd in 0..cfg.n_heads {
            let cols = hd * dh..(hd + 1) * dh;
            let qh = &q[cols.clone()];
            let mut scores: Vec<f64> = alive
                .iter()
                .map(|e| kernels::dot(qh, &e.key[cols.clone()]) * scale)
                .collect();
            scores.push(kernels::dot(qh, &k[cols.clone()]) * scale);
            kernels::softmax_in_place(&mut scores);
            let mut values = Vec::with_capacity(n * dh);
            for e in alive {
                values.extend_from_slice(&e.value[cols.clone()]);
            }
            values.extend_from_slice(&v[cols.clone()]);
            heads.extend(matmul(&scores, &values, 1, n, dh));
        }
        let attn = vecmat(&heads, &lp.wo.values, d);
        x.iter_mut().zip(&attn).for_each(|(a, b)| *a += b);
        let hm = rmsnorm_row(&x, &lp.mlp_norm.values);
        let hidden: Vec<f64> = vecmat(&hm, &lp.w1.values, cfg.d_hidden()).into_iter().map(gelu).collect();
        let m = vecmat(&hidden, &lp.w2.values, d);
        x.iter_mut().zip(&m).for_each(|(a, b)| *a += b);
        queries.push(q);
        new_entries.push((k, v));
    }
    let logits = vecmat(&rmsnorm_row(&x, &params.final_norm.values), &params.head.values, cfg.vocab);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NgcError::Numeric(format!("non-finite logits at position {position}")));
    }
    cache.push_token(new_entries)?;
    Ok(DecodeOutput { logits, queries })
}
