use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flowlab_core::dyson::{dyson_cocycle, ode_cocycle, DEFAULT_DYSON_NODES};
use flowlab_core::sample::{corpus_rng, random_in_algebra};
use flowlab_core::smoothing::DEFAULT_SMOOTHING_NODES;
use flowlab_core::{analytic_smooth, extract_flow_generator, matrix_exponential, Flow, NestAlgebra};

const DIMS: [usize; 3] = [2, 4, 6];

fn setup(dim: usize) -> (NestAlgebra, Flow, flowlab_core::Element) {
    let mut rng = corpus_rng(7);
    let alg = NestAlgebra::upper_triangular(dim).unwrap();
    let g = random_in_algebra(&mut rng, &alg, 0.5);
    let p = random_in_algebra(&mut rng, &alg, 0.5);
    (alg, Flow::inner(g).unwrap(), p)
}

fn expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_exponential");
    for dim in DIMS {
        let (_, flow, _) = setup(dim);
        let g = flow.inner_generator().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &g, |b, g| {
            b.iter(|| matrix_exponential(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn cocycles(c: &mut Criterion) {
    let mut group = c.benchmark_group("cocycle");
    for dim in DIMS {
        let (_, flow, p) = setup(dim);
        group.bench_with_input(BenchmarkId::new("dyson", dim), &dim, |b, _| {
            b.iter(|| dyson_cocycle(&flow, black_box(&p), 1.0, 20, DEFAULT_DYSON_NODES).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ode", dim), &dim, |b, _| {
            b.iter(|| ode_cocycle(&flow, black_box(&p), 1.0, 1000).unwrap())
        });
    }
    group.finish();
}

fn smoothing(c: &mut Criterion) {
    let mut group = c.benchmark_group("analytic_smooth");
    for dim in DIMS {
        let (_, flow, a) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| analytic_smooth(&flow, black_box(&a), 10.0, 0.0, DEFAULT_SMOOTHING_NODES).unwrap())
        });
    }
    group.finish();
}

fn extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract_flow_generator");
    group.sample_size(20);
    for dim in DIMS {
        let (alg, flow, _) = setup(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| extract_flow_generator(black_box(&flow), &alg, 1e-2).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, expm, cocycles, smoothing, extraction);
criterion_main!(benches);
