use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ngc_core::cache::{CacheState, EvictionConfig};
use ngc_core::model::{decode_step, forward_logits, init_params, ModelConfig, ModelParams};
use ngc_core::replay::build_replay_masks;
use ngc_core::rollout::{rollout, EvictionPolicy, RolloutConfig};
use ngc_core::sampler::{gumbel_topk, sequence_logprob};
use ngc_core::training::{trajectory_loss, TrainMode};
use ngc_core::Trajectory;

fn model() -> ModelParams {
    init_params(&ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 32,
        vocab: 144,
        max_seq: 64,
        seed: 0,
    })
    .unwrap()
}

const EVICTION: EvictionConfig = EvictionConfig {
    cadence: 16,
    rate: 0.5,
    block_size: 2,
    window: 2,
    layers: 2,
};

fn trajectory(params: &ModelParams) -> Trajectory {
    let cfg = RolloutConfig {
        eviction: Some(EVICTION),
        policy: EvictionPolicy::Sampled,
        max_new_tokens: 40,
        temperature: 1.0,
        eos: None,
        meta_token: None,
    };
    rollout(params, &[0, 4, 64, 75, 86, 3, 24], &cfg, 1, 0).unwrap()
}

fn sampler(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scores: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let sigma: Vec<usize> = (0..32).map(|i| i * 2).collect();
    c.bench_function("sequence_logprob n64 k32", |b| b.iter(|| sequence_logprob(&scores, &sigma).unwrap()));
    c.bench_function("gumbel_topk n64 k32", |b| b.iter(|| gumbel_topk(&scores, 32, &mut rng).unwrap()));
}

fn decode(c: &mut Criterion) {
    let params = model();
    let mut warm = CacheState::new(2);
    for t in 0..40 {
        decode_step(&params, &mut warm, t % 144).unwrap();
    }
    c.bench_function("decode_step cache40", |b| {
        b.iter_batched(
            || warm.clone(),
            |mut cache| decode_step(&params, &mut cache, 7).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn replay(c: &mut Criterion) {
    let params = model();
    let traj = trajectory(&params);
    let masks = build_replay_masks(&traj.log, traj.len(), 2, Some(EVICTION.cadence)).unwrap();
    c.bench_function("replay forward T47", |b| {
        b.iter(|| forward_logits(&params, &traj.tokens, &masks.layers).unwrap())
    });
    c.bench_function("replay forward+backward joint loss T47", |b| {
        b.iter(|| trajectory_loss(&params, &traj, 1.0, 1.0, Some(&EVICTION), TrainMode::Ngc).unwrap())
    });
    c.bench_function("rollout 40 tokens with eviction", |b| b.iter(|| trajectory(&params)));
}

criterion_group!(benches, sampler, decode, replay);
criterion_main!(benches);
