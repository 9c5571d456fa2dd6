use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use shapx_core::models::{masked_game, synthetic_game, MaskingRule, SyntheticKind, TabularModel};
use shapx_core::{
    amortized_inference, estimate_kernelshap, estimate_permutation, exact_shapley, simshap_target, Activation,
    ExplainerNet, Objective, RandomSource,
};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_shapley");
    for d in [8usize, 12, 16] {
        let game = synthetic_game(&SyntheticKind::RandomUniform, d, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &game, |b, g| b.iter(|| exact_shapley(black_box(g))));
    }
    group.finish();
}

fn stochastic(c: &mut Criterion) {
    let game = synthetic_game(&SyntheticKind::RandomUniform, 12, 1).unwrap();
    let mut group = c.benchmark_group("stochastic_d12_m2048");
    group.bench_function("kernelshap", |b| {
        let mut rng = RandomSource::new(0, 0);
        b.iter(|| estimate_kernelshap(&game, 2048, &mut rng, false))
    });
    group.bench_function("kernelshap_paired", |b| {
        let mut rng = RandomSource::new(0, 0);
        b.iter(|| estimate_kernelshap(&game, 2048, &mut rng, true))
    });
    group.bench_function("permutation", |b| {
        let mut rng = RandomSource::new(0, 0);
        b.iter(|| estimate_permutation(&game, 2048 / 12, &mut rng, false))
    });
    group.bench_function("simshap_target", |b| {
        let mut rng = RandomSource::new(0, 0);
        b.iter(|| simshap_target(&game, 2048, &mut rng, true))
    });
    group.finish();
}

fn amortized_vs_kernelshap(c: &mut Criterion) {
    let d = 64;
    let model = Arc::new(TabularModel::random_mlp(d, &[32, 32], 2, 64).unwrap());
    let mut rng = RandomSource::new(64, 5);
    let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let net = ExplainerNet::new(d, d, 2, &ExplainerNet::default_hidden(d), Activation::Relu, Objective::SimShap, 0)
        .unwrap();
    let mut group = c.benchmark_group("explain_d64");
    group.bench_function("amortized_inference", |b| b.iter(|| amortized_inference(&net, black_box(&x), None)));
    group.sample_size(10);
    group.bench_function("kernelshap_m2048", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let game = masked_game(model.clone(), &x, 0, &MaskingRule::Zeros).unwrap();
            estimate_kernelshap(&game, 2048, &mut RandomSource::new(seed, 0), false)
        })
    });
    group.finish();
}

criterion_group!(benches, exact, stochastic, amortized_vs_kernelshap);
criterion_main!(benches);
