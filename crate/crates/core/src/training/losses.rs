use crate::autograd::{sum_all, Tape, Var};
use crate::error::{NgcError, Result};

/// `Â_i = r_i − mean(r)`; no scale normalization.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(NgcError::Usage(format!("a group needs at least 2 rollouts, got {}", rewards.len())));
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(rewards.iter().map(|r| r - mean).collect())
}

fn check(len: usize, adv: &[f64]) -> Result<()> {
    if len != adv.len() {
        return Err(NgcError::Dimension(format!("{len} trajectories, {} advantages", adv.len())));
    }
    if adv.is_empty() {
        return Err(NgcError::Usage("empty group".into()));
    }
    Ok(())
}

/// `−(1/G) Σ_i Â_i Σ_t log π(o_{i,t})`. Each entry of `logprobs` holds one
/// trajectory's completion-token log-probabilities.
pub fn token_loss<'t>(tape: &'t Tape, logprobs: &[Var<'t>], advantages: &[f64]) -> Result<Var<'t>> {
    check(logprobs.len(), advantages)?;
    let g = advantages.len() as f64;
    let terms = logprobs
        .iter()
        .zip(advantages)
        .filter(|(lp, &a)| a != 0.0 && lp.rows() * lp.cols() > 0)
        .map(|(lp, &a)| lp.sum()?.scale(-a / g))
        .collect::<Result<Vec<_>>>()?;
    sum_all(tape, &terms)
}

/// `Σ_ℓ −(1/G) Σ_i Â_i · mean_rounds log p(σ)`. `logprobs[i][ℓ]` holds
/// trajectory `i`'s per-round values for layer `ℓ`; layers without rounds
/// contribute nothing.
pub fn mem_loss<'t>(tape: &'t Tape, logprobs: &[Vec<Vec<Var<'t>>>], advantages: &[f64]) -> Result<Var<'t>> {
    check(logprobs.len(), advantages)?;
    let g = advantages.len() as f64;
    let mut terms = Vec::new();
    for (layers, &a) in logprobs.iter().zip(advantages) {
        if a == 0.0 {
            continue;
        }
        for rounds in layers.iter().filter(|r| !r.is_empty()) {
            let mean = sum_all(tape, rounds)?.scale(1.0 / rounds.len() as f64)?;
            terms.push(mean.scale(-a / g)?);
        }
    }
    sum_all(tape, &terms)
}

pub fn total_loss<'t>(token: &Var<'t>, mem: &Var<'t>) -> Result<Var<'t>> {
    token.add(mem)
}

/// Zeroes the reward of a trajectory shorter than `threshold` tokens.
pub fn apply_min_length_penalty(reward: f64, length: usize, threshold: usize) -> f64 {
    if length < threshold {
        0.0
    } else {
        reward
    }
}
