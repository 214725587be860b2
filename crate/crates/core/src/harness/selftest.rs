//! Quick invariant checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{avg_peak_reduction, pass_at_k, PeakPair};
use crate::cache::{pre_round_sizes, steady_state_size, EvictionConfig};
use crate::error::Result;
use crate::model::{forward_logits, init_params, ModelConfig};
use crate::replay::{build_replay_masks, example_log, incremental_logits, mask_grid, EXAMPLE_SIZE};
use crate::rollout::{rollout, EvictionPolicy, RolloutConfig};
use crate::sampler::sequence_logprob;
use crate::training::{curriculum_rate, group_advantages, CurriculumConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn permutations_sum(scores: &[f64], k: usize, prefix: &mut Vec<usize>) -> Result<f64> {
    if prefix.len() == k {
        return Ok(sequence_logprob(scores, prefix)?.exp());
    }
    let mut total = 0.0;
    for i in 0..scores.len() {
        if !prefix.contains(&i) {
            prefix.push(i);
            total += permutations_sum(scores, k, prefix)?;
            prefix.pop();
        }
    }
    Ok(total)
}

pub const EXAMPLE_ROW_5: &str = "t5  # 1 # 1 # # . . . .";
pub const EXAMPLE_ROW_8: &str = "t8  # 1 2 1 # 2 # # # .";

pub fn run_selftest() -> Vec<Check> {
    vec![
        check("steady state", || {
            let mut worst = 0.0f64;
            for cadence in [64, 256] {
                for rate in [0.25, 0.5, 0.75, 1.0] {
                    let cfg = EvictionConfig {
                        cadence,
                        rate,
                        block_size: 32,
                        window: 8,
                        layers: 1,
                    };
                    let last = *pre_round_sizes(10, 50, rate, &cfg).last().expect("50 rounds") as f64;
                    worst = worst.max((last - steady_state_size(cadence, rate, 1)?).abs());
                }
            }
            Ok((worst <= 32.0, format!("max gap {worst} tokens")))
        }),
        check("ordered subsets sum to one", || {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut worst = 0.0f64;
            for n in 1..=5 {
                for k in 1..=n.min(3) {
                    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    worst = worst.max((permutations_sum(&scores, k, &mut Vec::new())? - 1.0).abs());
                }
            }
            Ok((worst < 1e-9, format!("max error {worst:.2e}")))
        }),
        check("example replay grid", || {
            let log = example_log();
            let masks = build_replay_masks(&log, EXAMPLE_SIZE, 1, None)?;
            let grid = mask_grid(&masks, &log, 0);
            let rows: Vec<&str> = grid.lines().skip(1).collect();
            Ok((rows[5] == EXAMPLE_ROW_5 && rows[8] == EXAMPLE_ROW_8, format!("{} rows", rows.len())))
        }),
        check("replay equals incremental decode", || {
            let cfg = ModelConfig {
                n_layers: 2,
                n_heads: 2,
                d_model: 16,
                vocab: 16,
                max_seq: 40,
                seed: 5,
            };
            let mut params = init_params(&cfg)?;
            for t in params.tensors_mut() {
                t.values.iter_mut().for_each(|v| *v *= 25.0);
            }
            let ev = EvictionConfig {
                cadence: 6,
                rate: 0.5,
                block_size: 2,
                window: 2,
                layers: 2,
            };
            let rc = RolloutConfig {
                eviction: Some(ev),
                policy: EvictionPolicy::Sampled,
                max_new_tokens: 30,
                temperature: 1.0,
                eos: None,
                meta_token: None,
            };
            let traj = rollout(&params, &[1, 2, 3], &rc, 0, 0)?;
            let masks = build_replay_masks(&traj.log, traj.len(), 2, Some(ev.cadence))?;
            let a = incremental_logits(&params, &traj.tokens, &traj.log)?;
            let b = forward_logits(&params, &traj.tokens, &masks.layers)?;
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            Ok((diff < 1e-9, format!("max |diff| {diff:.2e} over {} rounds", traj.log.n_rounds())))
        }),
        check("curriculum", || {
            let c = CurriculumConfig {
                levels: vec![1.0, 0.875, 0.75],
                steps_per_stage: 10,
                alpha: 0.6,
            };
            let v = curriculum_rate(7, &c);
            Ok(((v - 0.9375).abs() < 1e-12 && curriculum_rate(99, &c) == 0.75, format!("p0(7) = {v}")))
        }),
        check("advantages centered", || {
            let a = group_advantages(&[1.0, 0.0, 0.0, 0.0])?;
            let s: f64 = a.iter().sum();
            Ok((s.abs() < 1e-12 && a[0] == 0.75, format!("{a:?}")))
        }),
        check("pass@k monotone", || {
            let mut ok = true;
            for c in 0..=8 {
                let mut prev = 0.0;
                for k in 1..=8 {
                    let v = pass_at_k(8, c, k)?;
                    ok &= v >= prev;
                    prev = v;
                }
            }
            Ok((ok, "n = 8".into()))
        }),
        check("peak reduction sanity", || {
            let cfg = EvictionConfig {
                cadence: 256,
                rate: 0.5,
                block_size: 32,
                window: 32,
                layers: 2,
            };
            let pair = [PeakPair {
                prompt: 10,
                baseline: 1014,
                method: 1014,
            }];
            let r = avg_peak_reduction(&pair, 0.5, &cfg)?;
            Ok((r >= 1.0, format!("{r}")))
        }),
    ]
}
