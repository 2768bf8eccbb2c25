use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tvtune_bench::{allocation_case, cornering_point};
use tvtune_core::controller::allocate;
use tvtune_core::ddpg::{Activation, Mlp};
use tvtune_core::dynamics::{step_rk4, tire_forces};
use tvtune_core::env::{Action, EpisodeConfig, PlantConfig, TorqueVectoringEnv};

fn dynamics(c: &mut Criterion) {
    let (state, input, tire, params) = cornering_point();
    c.bench_function("tire_forces", |b| {
        b.iter(|| tire_forces(black_box(&state), black_box(input.steer), &tire, &params))
    });
    c.bench_function("step_rk4", |b| {
        b.iter(|| step_rk4(black_box(&state), &input, &tire, &params, 1e-3))
    });
}

fn allocation(c: &mut Criterion) {
    let (e, jac, w) = allocation_case();
    let r = tvtune_core::dynamics::VehicleParams::default().wheel_radius_eff;
    c.bench_function("allocate", |b| {
        b.iter(|| allocate(black_box(&e), black_box(&jac), &w, r))
    });
}

fn networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let actor = Mlp::random(
        &[9, 100, 100, 4],
        Activation::Relu,
        Activation::Tanh,
        &mut rng,
    );
    let critic = Mlp::random(
        &[13, 100, 100, 1],
        Activation::Relu,
        Activation::Linear,
        &mut rng,
    );
    let x = [0.1, -0.2, 0.05, 0.7, 0.01, 0.0, 0.1, 0.3, 0.0];
    let xc = [
        0.1, -0.2, 0.05, 0.7, 0.01, 0.0, 0.1, 0.3, 0.0, 0.5, -0.5, 0.2, 0.0,
    ];
    c.bench_function("actor_forward", |b| b.iter(|| actor.forward(black_box(&x))));
    c.bench_function("critic_forward", |b| {
        b.iter(|| critic.forward(black_box(&xc)))
    });
}

fn episode(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    let mut env = TorqueVectoringEnv::new(PlantConfig::default()).unwrap();
    let cfg = EpisodeConfig::scenario(100.0, 0.5);
    group.bench_function("manual_15s", |b| {
        b.iter(|| env.run_episode(&cfg, |_| Action::uniform(100.0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, dynamics, allocation, networks, episode);
criterion_main!(benches);
