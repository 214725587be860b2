//! Ordered subset sampling over block scores.
//!
//! Gumbel-top-k draws `K` distinct blocks in one shot; the result is
//! distributed exactly like `K` sequential draws without replacement from
//! `softmax(s)`, so its probability has the closed form
//!
//! ```text
//! log p(σ | s) = Σ_j [ s[σ_j] − log Σ_{t ∉ {σ_1..σ_{j−1}}} exp(s[t]) ]
//! ```
//!
//! `sequence_logprob` evaluates it with one log-sum-exp plus a running
//! log-subtraction of the removed mass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::kernels::logsumexp;
use crate::error::{NgcError, Result};

/// Below this distance from total cancellation the running partition
/// function is recomputed from scratch.
pub const CANCELLATION_THRESHOLD: f64 = 1e-12;

/// An ordered draw of `K` block ids together with its log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDraw {
    pub sigma: Vec<usize>,
    pub logprob: f64,
}

fn validate(scores: &[f64], sigma: &[usize]) -> Result<()> {
    let mut seen = vec![false; scores.len()];
    for &id in sigma {
        if id >= scores.len() {
            return Err(NgcError::Usage(format!("block id {id} out of range {}", scores.len())));
        }
        if seen[id] {
            return Err(NgcError::Usage(format!("block id {id} selected twice")));
        }
        if !scores[id].is_finite() {
            return Err(NgcError::Usage(format!("block {id} has no valid keys and cannot be selected")));
        }
        seen[id] = true;
    }
    if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
        return Err(NgcError::Numeric("block scores contain NaN or +inf".into()));
    }
    Ok(())
}

/// Exact log-probability of the ordered selection `sigma`.
///
/// Entries equal to `-inf` are blocks without valid keys; they carry no
/// mass and may not appear in `sigma`.
pub fn sequence_logprob(scores: &[f64], sigma: &[usize]) -> Result<f64> {
    validate(scores, sigma)?;
    let mut removed = vec![false; scores.len()];
    let mut log_mass = logsumexp(scores);
    let mut total = 0.0;
    for (j, &id) in sigma.iter().enumerate() {
        if log_mass == f64::NEG_INFINITY {
            return Err(NgcError::Numeric(format!(
                "no probability mass left with {} picks remaining",
                sigma.len() - j
            )));
        }
        let rel = scores[id] - log_mass;
        total += rel;
        removed[id] = true;
        if j + 1 == sigma.len() {
            break;
        }
        let arg = -rel.exp();
        log_mass = if arg + 1.0 <= CANCELLATION_THRESHOLD {
            let rest: Vec<f64> = scores
                .iter()
                .zip(&removed)
                .filter(|(_, &r)| !r)
                .map(|(s, _)| *s)
                .collect();
            logsumexp(&rest)
        } else {
            log_mass + arg.ln_1p()
        };
    }
    if !total.is_finite() {
        return Err(NgcError::Numeric(format!("sequence log-probability is {total}")));
    }
    Ok(total.min(0.0))
}

/// Gradient of [`sequence_logprob`] with respect to the scores.
///
/// Recomputes each step's partition function directly, independent of the
/// running-mass path used in the forward value.
pub fn sequence_logprob_grad(scores: &[f64], sigma: &[usize]) -> Vec<f64> {
    let mut grad = vec![0.0; scores.len()];
    let mut remaining = vec![true; scores.len()];
    for &id in sigma {
        let rest: Vec<f64> = scores
            .iter()
            .zip(&remaining)
            .map(|(s, &r)| if r { *s } else { f64::NEG_INFINITY })
            .collect();
        let lse = logsumexp(&rest);
        for (t, g) in grad.iter_mut().enumerate() {
            if remaining[t] && scores[t].is_finite() {
                *g -= (scores[t] - lse).exp();
            }
        }
        grad[id] += 1.0;
        remaining[id] = false;
    }
    grad
}

/// Samples `k` blocks by perturbing scores with i.i.d. Gumbel(0, 1) noise
/// and keeping the `k` largest, in descending perturbed order.
pub fn gumbel_topk<R: Rng + ?Sized>(scores: &[f64], k: usize, rng: &mut R) -> Result<SubsetDraw> {
    let finite = scores.iter().filter(|s| s.is_finite()).count();
    if k > finite {
        return Err(NgcError::Usage(format!("cannot keep {k} of {finite} selectable blocks")));
    }
    let mut perturbed: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_finite())
        .map(|(i, &s)| {
            let u: f64 = rng.gen::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            (i, s - (-u.ln()).ln())
        })
        .collect();
    perturbed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let sigma: Vec<usize> = perturbed.iter().take(k).map(|(i, _)| *i).collect();
    let logprob = sequence_logprob(scores, &sigma)?;
    Ok(SubsetDraw { sigma, logprob })
}

/// Deterministic top-k; equal scores favour the lower block id.
pub fn greedy_topk(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    let finite = scores.iter().filter(|s| s.is_finite()).count();
    if k > finite {
        return Err(NgcError::Usage(format!("cannot keep {k} of {finite} selectable blocks")));
    }
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trajectory: u64,
    pub layer: u64,
    pub round: u64,
}

/// Layer id reserved for the token-sampling stream of a trajectory.
pub const TOKEN_STREAM: u64 = u64::MAX;

impl StreamKey {
    pub fn eviction(seed: u64, trajectory: u64, layer: usize, round: usize) -> Self {
        Self {
            seed,
            trajectory,
            layer: layer as u64,
            round: round as u64,
        }
    }

    pub fn tokens(seed: u64, trajectory: u64) -> Self {
        Self {
            seed,
            trajectory,
            layer: TOKEN_STREAM,
            round: 0,
        }
    }

    /// Counter-based generator for this key. Streams for different keys
    /// never depend on the order in which they are requested.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let stream = splitmix64(splitmix64(splitmix64(self.trajectory) ^ self.layer) ^ self.round);
        rng.set_stream(stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn uniform_pair_is_minus_log_six() {
        let lp = sequence_logprob(&[0.0, 0.0, 0.0], &[0, 1]).unwrap();
        assert!((lp + 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_block_hand_values() {
        let s = [LN2, 0.0];
        assert!((sequence_logprob(&s, &[0, 1]).unwrap() - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((sequence_logprob(&s, &[1, 0]).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(matches!(sequence_logprob(&[0.0, 1.0], &[0, 0]), Err(NgcError::Usage(_))));
        assert!(matches!(sequence_logprob(&[0.0, 1.0], &[2]), Err(NgcError::Usage(_))));
    }

    #[test]
    fn sentinel_blocks_carry_no_mass() {
        let s = [0.0, f64::NEG_INFINITY, 0.0];
        let lp = sequence_logprob(&s, &[2, 0]).unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-12);
        assert!(sequence_logprob(&s, &[1]).is_err());
        assert!(gumbel_topk(&s, 3, &mut StreamKey::tokens(1, 1).rng()).is_err());
    }

    #[test]
    fn cancellation_falls_back_to_exact_mass() {
        // The first pick holds essentially all of the mass.
        let s = [60.0, 0.0, -1.0];
        let lp = sequence_logprob(&s, &[0, 1]).unwrap();
        let exact = (60.0 - logsumexp(&s)) + (0.0 - logsumexp(&[0.0, -1.0]));
        assert!((lp - exact).abs() < 1e-12, "{lp} vs {exact}");
    }

    #[test]
    fn greedy_ties_prefer_lower_ids() {
        assert_eq!(greedy_topk(&[3.0, 1.0, 2.0], 2).unwrap(), vec![0, 2]);
        assert_eq!(greedy_topk(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn full_draw_is_a_permutation() {
        let mut rng = StreamKey::eviction(7, 0, 0, 0).rng();
        let draw = gumbel_topk(&[0.3, -1.0, 2.0, 0.0], 4, &mut rng).unwrap();
        let mut ids = draw.sigma.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert!(draw.logprob <= 0.0);
    }

    #[test]
    fn dominant_block_always_first() {
        let mut rng = StreamKey::eviction(3, 1, 0, 0).rng();
        for _ in 0..2000 {
            let d = gumbel_topk(&[0.0, 50.0, 0.0], 2, &mut rng).unwrap();
            assert_eq!(d.sigma[0], 1);
        }
    }

    #[test]
    fn streams_are_order_independent() {
        let a: f64 = StreamKey::eviction(9, 4, 1, 2).rng().gen();
        let _ = StreamKey::eviction(9, 5, 0, 0).rng().gen::<f64>();
        let b: f64 = StreamKey::eviction(9, 4, 1, 2).rng().gen();
        let c: f64 = StreamKey::eviction(9, 4, 1, 3).rng().gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
