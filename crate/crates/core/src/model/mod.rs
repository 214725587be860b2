//! Small pre-norm decoder-only transformer.
//!
//! Multi-head attention with rotary embeddings indexed by the token's
//! original position (so keys keep their position after neighbours are
//! evicted), a GELU MLP of width `4·d_model`, RMS norms and no biases.
//!
//! Two execution paths share the same kernels: [`forward_masked`] runs a
//! whole sequence on an autograd tape with one visibility mask per layer,
//! and [`decode_step`] advances one token against a [`CacheState`].
//!
//! [`CacheState`]: crate::cache::CacheState

pub mod checkpoint;
mod config;
mod decode;
mod forward;
mod params;

pub use config::ModelConfig;
pub use decode::{decode_step, DecodeOutput};
pub use forward::{
    causal_masks, forward_logits, forward_masked, AttentionMask, ForwardOutput, LayerTrace, LayerVars, ModelVars,
};
pub use params::{init_params, init_shapes, Gradients, LayerParams, ModelParams, INIT_STD};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::CacheState;
    use crate::error::NgcError;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(seed: u64) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 16,
            vocab: 12,
            max_seq: 64,
            seed,
        }
    }

    /// Larger-than-default weights so attention patterns are far from uniform.
    fn sharp_params(seed: u64) -> ModelParams {
        let mut p = init_params(&config(seed)).unwrap();
        for t in p.tensors_mut() {
            if t.shape.len() == 2 {
                t.values.iter_mut().for_each(|v| *v *= 25.0);
            }
        }
        p
    }

    fn random_tokens(n: usize, vocab: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0..vocab)).collect()
    }

    fn decode_all(params: &ModelParams, tokens: &[usize]) -> Vec<f64> {
        let mut cache = CacheState::new(params.config.n_layers);
        tokens
            .iter()
            .flat_map(|&t| decode_step(params, &mut cache, t).unwrap().logits)
            .collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        assert_eq!(init_params(&config(1)).unwrap(), init_params(&config(1)).unwrap());
        assert_ne!(init_params(&config(1)).unwrap(), init_params(&config(2)).unwrap());
    }

    #[test]
    fn init_scale_matches_half_normal_mean() {
        let cfg = ModelConfig {
            d_model: 64,
            vocab: 256,
            ..config(5)
        };
        let p = init_params(&cfg).unwrap();
        let mean_abs = p.embed.values.iter().map(|v| v.abs()).sum::<f64>() / p.embed.len() as f64;
        assert!((0.01..=0.04).contains(&mean_abs), "{mean_abs}");
        // E|N(0, σ²)| = σ·sqrt(2/π)
        let expected = INIT_STD * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean_abs - expected).abs() < 0.1 * expected);
        p.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { n_heads: 3, ..config(0) }.validate().is_err());
        assert!(ModelConfig { vocab: 7, ..config(0) }.validate().is_err());
        assert!(ModelConfig { n_heads: 16, ..config(0) }.validate().is_err());
    }

    #[test]
    fn causal_forward_matches_incremental_decode() {
        let p = sharp_params(3);
        let tokens = random_tokens(40, 12, 9);
        let replay = forward_logits(&p, &tokens, &causal_masks(2, 40)).unwrap();
        let inc = decode_all(&p, &tokens);
        assert!(max_abs_diff(&replay, &inc) < 1e-9);
    }

    #[test]
    fn self_only_mask_isolates_positions() {
        let p = sharp_params(4);
        let mut mask = AttentionMask {
            size: 6,
            visible: vec![false; 36],
        };
        (0..6).for_each(|i| mask.set(i, i, true));
        let masks = vec![mask; 2];
        let a = random_tokens(6, 12, 1);
        let mut b = random_tokens(6, 12, 2);
        b[3] = a[3];
        let la = forward_logits(&p, &a, &masks).unwrap();
        let lb = forward_logits(&p, &b, &masks).unwrap();
        assert_eq!(&la[36..48], &lb[36..48]);
    }

    #[test]
    fn eviction_mask_matches_physical_eviction() {
        let p = sharp_params(6);
        let tokens = random_tokens(8, 12, 3);
        // Layer 0 drops position 1 after token 4 is processed, layer 1 drops 0 and 2.
        let mut cache = CacheState::new(2);
        let mut inc = Vec::new();
        for (i, &t) in tokens.iter().enumerate() {
            inc.extend(decode_step(&p, &mut cache, t).unwrap().logits);
            if i == 4 {
                cache.layers[0].retain(|e| e.global_index != 1);
                cache.layers[1].retain(|e| e.global_index != 0 && e.global_index != 2);
            }
        }
        let mut masks = causal_masks(2, 8);
        for r in 5..8 {
            masks[0].set(r, 1, false);
            masks[1].set(r, 0, false);
            masks[1].set(r, 2, false);
        }
        let replay = forward_logits(&p, &tokens, &masks).unwrap();
        assert!(max_abs_diff(&replay, &inc) < 1e-9);
    }

    #[test]
    fn decode_grows_every_layer_by_one() {
        let p = init_params(&config(0)).unwrap();
        let mut cache = CacheState::new(2);
        let out = decode_step(&p, &mut cache, 3).unwrap();
        assert_eq!(out.logits.len(), 12);
        assert_eq!(out.queries.len(), 2);
        assert_eq!(cache.alive_count(0), 1);
        decode_step(&p, &mut cache, 4).unwrap();
        assert_eq!((cache.alive_count(0), cache.alive_count(1)), (2, 2));
        assert_eq!(cache.tokens_seen_total, 2);
    }

    #[test]
    fn decode_rejects_mismatched_cache() {
        let p = init_params(&config(0)).unwrap();
        let mut cache = CacheState::new(3);
        assert!(matches!(decode_step(&p, &mut cache, 1), Err(NgcError::State(_))));
    }

    #[test]
    fn forward_rejects_bad_masks() {
        let p = init_params(&config(0)).unwrap();
        let tokens = [1, 2, 3];
        assert!(matches!(
            forward_logits(&p, &tokens, &causal_masks(2, 4)),
            Err(NgcError::Dimension(_))
        ));
        let mut m = causal_masks(2, 3);
        m[1].set(0, 2, true);
        assert!(matches!(forward_logits(&p, &tokens, &m), Err(NgcError::Usage(_))));
        let mut m = causal_masks(2, 3);
        m[0].set(2, 2, false);
        assert!(matches!(forward_logits(&p, &tokens, &m), Err(NgcError::Usage(_))));
    }

    #[test]
    fn forward_is_deterministic() {
        let p = sharp_params(1);
        let tokens = random_tokens(10, 12, 4);
        let masks = causal_masks(2, 10);
        assert_eq!(
            forward_logits(&p, &tokens, &masks).unwrap(),
            forward_logits(&p, &tokens, &masks).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = sharp_params(8);
        let mut buf = Vec::new();
        checkpoint::write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], checkpoint::MAGIC);
        let back = checkpoint::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, p);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(checkpoint::read_checkpoint(bad.as_slice()), Err(NgcError::Load(_))));
        let truncated = &buf[..buf.len() - 8];
        assert!(matches!(checkpoint::read_checkpoint(truncated), Err(NgcError::Load(_))));
    }
}
