use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use signum_bench::{harmonic, interleaved_harmonic, log_decay, triadic};
use signum_core::achieve::explore;
use signum_core::balancer::{balance_exhaustive, balance_greedy, block_sign_converge, unit_vector_corpus, Strategy};
use signum_core::greedy1d::{greedy_signs, lambda_count, LambdaParams};
use signum_core::target::hit_target;
use signum_core::{Norm, Real};

fn balancing(c: &mut Criterion) {
    let corpus = unit_vector_corpus(1, 16, 14);
    c.bench_function("balance_exhaustive n=14", |b| {
        b.iter(|| corpus.iter().map(|v| balance_exhaustive(black_box(v), Norm::Euclidean).unwrap().max_prefix_norm).sum::<f64>())
    });
    c.bench_function("balance_greedy n=14", |b| {
        b.iter(|| corpus.iter().map(|v| balance_greedy(black_box(v), Norm::Euclidean).unwrap().max_prefix_norm).sum::<f64>())
    });
    let spec = log_decay();
    c.bench_function("block_sign_converge lookahead N=1e4", |b| {
        b.iter(|| block_sign_converge(&spec, black_box(10_000), Strategy::Lookahead, Norm::Euclidean).unwrap())
    });
}

fn one_dimensional(c: &mut Criterion) {
    let spec = harmonic();
    c.bench_function("greedy_signs N=1e5", |b| {
        b.iter(|| greedy_signs(&spec, black_box(std::f64::consts::PI), 100_000).unwrap())
    });
    let params = LambdaParams::for_spec(&spec, Real::int(0), 4).unwrap();
    c.bench_function("lambda_count k=4 j=4", |b| b.iter(|| lambda_count(&params, &spec, black_box(4)).unwrap()));
}

fn higher_dimensional(c: &mut Criterion) {
    let spec = interleaved_harmonic();
    let mut group = c.benchmark_group("target");
    group.sample_size(10);
    group.bench_function("hit_target 6 stages", |b| {
        b.iter(|| hit_target(&spec, black_box(&[1.0, -2.0]), 6, 1_000_000).unwrap())
    });
    group.finish();
    let tri = triadic();
    c.bench_function("explore triadic depth 16", |b| b.iter(|| explore(&tri, black_box(16)).unwrap()));
}

criterion_group!(benches, balancing, one_dimensional, higher_dimensional);
criterion_main!(benches);
