//! Property tests for the cache, sampler, scorer and training invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ngc_core::cache::{
    apply_retention, keep_count, partition_blocks, peak_occupancy, surviving_after_round, CacheState, EvictionConfig,
};
use ngc_core::harness::metrics::{avg_peak_reduction, pass_at_k, PeakPair};
use ngc_core::model::{init_params, ModelConfig};
use ngc_core::replay::build_replay_masks;
use ngc_core::rollout::{rollout, EvictionPolicy, RolloutConfig};
use ngc_core::sampler::{greedy_topk, gumbel_topk, sequence_logprob, sequence_logprob_grad};
use ngc_core::scorers::{aggregate_blocks, ngc_key_scores};
use ngc_core::training::{curriculum_rate, group_advantages, CurriculumConfig};

fn scores(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..=max)
}

fn filled_cache(layers: usize, tokens: usize) -> CacheState {
    let mut c = CacheState::new(layers);
    for t in 0..tokens {
        c.push_token(vec![(vec![t as f64], vec![0.0]); layers]).unwrap();
    }
    c
}

proptest! {
    #[test]
    fn keep_count_matches_rounding_rule(n in 1usize..200, rate in 0.0f64..=1.0) {
        let k = keep_count(n, rate);
        prop_assert!((1..=n).contains(&k));
        let exact = (1.0 - rate) * n as f64;
        if exact >= 1.0 {
            prop_assert!((k as f64 - exact).abs() <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn partition_covers_in_order(count in 1usize..300, b in 1usize..40) {
        let p = partition_blocks(count, b).unwrap();
        prop_assert_eq!(p.covered(), count);
        prop_assert_eq!(p.len(), count.div_ceil(b));
        prop_assert!(p.sizes[..p.len() - 1].iter().all(|&s| s == b));
        prop_assert!((1..=b).contains(p.sizes.last().unwrap()));
        let ranges = p.ranges();
        prop_assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
    }

    #[test]
    fn retention_keeps_window_and_chosen_blocks(
        alive in 3usize..80,
        b in 1usize..6,
        window in 0usize..4,
        rate in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(alive > window);
        let mut cache = filled_cache(2, alive);
        let p = partition_blocks(alive - window, b).unwrap();
        let k = keep_count(p.len(), rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..p.len()).map(|i| ((seed >> (i % 60)) & 7) as f64 + i as f64 * 1e-3).collect();
        let kept = gumbel_topk(&noise, k, &mut rng).unwrap().sigma;
        let before = cache.alive_indices(0);
        let evicted = apply_retention(&mut cache, 0, &p, &kept).unwrap();
        let after = cache.alive_indices(0);
        cache.check().unwrap();
        let kept_len: usize = kept.iter().map(|&j| p.sizes[j]).sum();
        prop_assert_eq!(after.len(), kept_len + window);
        prop_assert_eq!(after.len() + evicted.len(), before.len());
        prop_assert_eq!(&after[after.len() - window..], &before[before.len() - window..]);
        prop_assert!(after.iter().all(|i| before.contains(i)));
        prop_assert_eq!(cache.alive_count(1), alive, "other layers untouched");
    }

    #[test]
    fn simulated_round_never_grows(alive in 1usize..500, rate in 0.0f64..=1.0, b in 1usize..40, w in 0usize..40) {
        let cfg = EvictionConfig { cadence: 64, rate, block_size: b, window: w, layers: 1 };
        let after = surviving_after_round(alive, rate, &cfg);
        prop_assert!(after <= alive);
        prop_assert!(after >= w.min(alive));
    }

    #[test]
    fn peak_is_bounded_by_no_eviction(p in 0usize..100, c in 0usize..600, rate in 0.0f64..=1.0) {
        let cfg = EvictionConfig { cadence: 32, rate, block_size: 8, window: 8, layers: 2 };
        let peak = peak_occupancy(p, c, rate, &cfg);
        prop_assert!(peak <= 2 * (p + c));
        prop_assert_eq!(peak_occupancy(p, c, 0.0, &cfg), 2 * (p + c));
        if p + c > 0 {
            let pair = [PeakPair { prompt: p.max(1), baseline: c, method: c }];
            prop_assert!(avg_peak_reduction(&pair, rate, &cfg).unwrap() >= 1.0);
        }
    }

    #[test]
    fn gumbel_draw_is_a_valid_ordered_subset(s in scores(12), seed in any::<u64>(), kf in 0.0f64..1.0) {
        let k = 1 + ((s.len() - 1) as f64 * kf) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = gumbel_topk(&s, k, &mut rng).unwrap();
        prop_assert_eq!(d.sigma.len(), k);
        let mut sorted = d.sigma.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
        prop_assert!(d.sigma.iter().all(|&i| i < s.len()));
        prop_assert!(d.logprob <= 0.0);
        prop_assert!((d.logprob - sequence_logprob(&s, &d.sigma).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn greedy_order_is_the_mode(s in scores(10), seed in any::<u64>(), kf in 0.0f64..1.0) {
        let k = 1 + ((s.len() - 1) as f64 * kf) as usize;
        let greedy = sequence_logprob(&s, &greedy_topk(&s, k).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other = gumbel_topk(&s, k, &mut rng).unwrap();
        prop_assert!(greedy >= other.logprob - 1e-12);
    }

    #[test]
    fn logprob_is_shift_invariant(s in scores(10), shift in -50.0f64..50.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = gumbel_topk(&s, s.len().div_ceil(2), &mut rng).unwrap().sigma;
        let moved: Vec<f64> = s.iter().map(|v| v + shift).collect();
        let a = sequence_logprob(&s, &sigma).unwrap();
        let b = sequence_logprob(&moved, &sigma).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn logprob_gradient_matches_differences(s in scores(8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = gumbel_topk(&s, s.len().div_ceil(2), &mut rng).unwrap().sigma;
        let g = sequence_logprob_grad(&s, &sigma);
        prop_assert!(g.iter().sum::<f64>().abs() < 1e-9);
        let h = 1e-6;
        for i in 0..s.len() {
            let mut up = s.clone();
            let mut down = s.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (sequence_logprob(&up, &sigma).unwrap() - sequence_logprob(&down, &sigma).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6, "i={} fd={} g={}", i, fd, g[i]);
        }
    }

    #[test]
    fn key_scores_are_a_distribution(
        n_keys in 1usize..20,
        n_q in 1usize..6,
        heads in 1usize..4,
        seed in any::<u64>(),
        b in 1usize..5,
    ) {
        use rand::Rng;
        let d_head = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vecs = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..heads * d_head).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
        };
        let q = vecs(n_q);
        let k = vecs(n_keys);
        let ks = ngc_key_scores(&q, &k, heads, d_head).unwrap();
        prop_assert!((ks.psi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(ks.psi.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let p = partition_blocks(n_keys, b).unwrap();
        let blocks = aggregate_blocks(&ks, &p).unwrap();
        prop_assert_eq!(blocks.len(), p.len());
        for (r, s) in p.ranges().into_iter().zip(&blocks) {
            let lo = ks.psi[r.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ks.psi[r].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*s >= lo - 1e-15 && *s <= hi + 1e-15);
        }
    }

    #[test]
    fn advantages_center_and_ignore_shifts(r in prop::collection::vec(0.0f64..1.0, 2..16), shift in -5.0f64..5.0) {
        let a = group_advantages(&r).unwrap();
        prop_assert!(a.iter().sum::<f64>().abs() < 1e-12);
        let moved: Vec<f64> = r.iter().map(|v| v + shift).collect();
        let b = group_advantages(&moved).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn curriculum_descends_between_levels(
        mut levels in prop::collection::vec(0.05f64..=1.0, 1..5),
        spp in 1u64..30,
        alpha in 0.0f64..=1.0,
    ) {
        levels.sort_by(|a, b| b.total_cmp(a));
        levels[0] = 1.0;
        let c = CurriculumConfig { levels: levels.clone(), steps_per_stage: spp, alpha };
        let last = *levels.last().unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..spp * (levels.len() as u64 + 2) {
            let v = curriculum_rate(step, &c);
            prop_assert!(v <= 1.0 + 1e-12 && v >= last - 1e-12);
            prop_assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn pass_at_k_is_monotone(n in 1usize..20, cf in 0.0f64..=1.0) {
        let c = (n as f64 * cf) as usize;
        let mut prev = 0.0;
        for k in 1..=n {
            let v = pass_at_k(n, c, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v + 1e-12 >= prev);
            if c < n {
                prop_assert!(pass_at_k(n, c + 1, k).unwrap() + 1e-12 >= v);
            }
            prev = v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replay_masks_are_causal_with_diagonal(seed in 0u64..1000, rate in 0.1f64..=0.9) {
        let params = init_params(&ModelConfig { n_layers: 2, n_heads: 2, d_model: 8, vocab: 12, max_seq: 64, seed }).unwrap();
        let ev = EvictionConfig { cadence: 6, rate, block_size: 2, window: 1, layers: 2 };
        let cfg = RolloutConfig {
            eviction: Some(ev),
            policy: EvictionPolicy::Sampled,
            max_new_tokens: 40,
            temperature: 1.0,
            eos: None,
            meta_token: None,
        };
        let traj = rollout(&params, &[1, 2, 3], &cfg, seed, 0).unwrap();
        let masks = build_replay_masks(&traj.log, traj.len(), 2, Some(ev.cadence)).unwrap();
        for layer in 0..2 {
            let rows = masks.sparse_rows(layer);
            prop_assert_eq!(rows.len(), traj.len());
            for (t, row) in rows.iter().enumerate() {
                prop_assert!(row.contains(&t));
                prop_assert!(row.iter().all(|&c| c <= t));
                prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            }
            // Once a key disappears from a row it never reappears.
            for t in 1..rows.len() {
                for &c in &rows[t - 1] {
                    if !rows[t].contains(&c) {
                        prop_assert!(rows[t..].iter().all(|r| !r.contains(&c)));
                    }
                }
            }
        }
    }
}
