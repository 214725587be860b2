//! Peak-memory reduction, pass@k and summary statistics.

use serde::{Deserialize, Serialize};

use crate::cache::{peak_occupancy, EvictionConfig};
use crate::error::{NgcError, Result};

/// Token counts of one prompt under the no-eviction baseline and the method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakPair {
    pub prompt: usize,
    pub baseline: usize,
    pub method: usize,
}

/// Mean over prompts of `peak(p, c_base, 0) / peak(p, c_method, rate)`.
/// A value of 2 means the method needs half the peak cache.
pub fn avg_peak_reduction(pairs: &[PeakPair], rate: f64, config: &EvictionConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(NgcError::Usage("peak reduction over an empty set".into()));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(NgcError::Domain(format!("eviction rate {rate} outside [0, 1]")));
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| {
            let base = peak_occupancy(p.prompt, p.baseline, 0.0, config) as f64;
            let method = peak_occupancy(p.prompt, p.method, rate, config) as f64;
            base / method
        })
        .sum();
    Ok(sum / pairs.len() as f64)
}

/// Unbiased estimate of pass@k from `n` samples with `c` correct:
/// `1 − C(n−c, k) / C(n, k)`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n || c > n {
        return Err(NgcError::Usage(format!("pass@{k} from {c}/{n} samples")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = (n - c + 1..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let total = 2f64.powi(trials as i32);
    let mut tail = 0.0;
    let mut c = 1.0;
    for i in 0..=trials {
        if i >= wins {
            tail += c;
        }
        c = c * (trials - i) as f64 / (i + 1) as f64;
    }
    tail / total
}
