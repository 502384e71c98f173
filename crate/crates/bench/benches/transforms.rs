use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hygt_core::{
    ar1_covariance_2d, build_trig_table, forward_fixed, greedy_init, jacobi_eigen, num_parameters, optimize,
    propagate_covariance, quantize_model, HyGTModel, OptimizerConfig,
};

fn model(log2_n: u32, rounds: usize) -> HyGTModel {
    let angles = (0..num_parameters(log2_n, rounds)).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    HyGTModel::new(log2_n, rounds, angles, None).unwrap()
}

fn float_forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_float");
    for log2_n in [4u32, 6, 8] {
        let m = model(log2_n, 3);
        let x: Vec<f64> = (0..m.dim()).map(|i| i as f64).collect();
        g.bench_with_input(BenchmarkId::from_parameter(m.dim()), &x, |b, x| {
            b.iter(|| m.forward(black_box(x)).unwrap())
        });
    }
    g.finish();
}

fn fixed_forward(c: &mut Criterion) {
    let table = build_trig_table(8, 10).unwrap();
    let mut g = c.benchmark_group("forward_fixed");
    for log2_n in [4u32, 6, 8] {
        let q = quantize_model(&model(log2_n, 3), 8).unwrap();
        let x: Vec<i64> = (0..q.dim() as i64).map(|i| i * 7 - 500).collect();
        g.bench_with_input(BenchmarkId::from_parameter(q.dim()), &x, |b, x| {
            b.iter(|| forward_fixed(&q, &table, black_box(x)).unwrap())
        });
    }
    g.finish();
}

fn statistics(c: &mut Criterion) {
    let phi16 = ar1_covariance_2d(4, 0.95).unwrap();
    let phi64 = ar1_covariance_2d(8, 0.95).unwrap();
    let m = model(6, 3);
    c.bench_function("propagate_covariance/64", |b| {
        b.iter(|| propagate_covariance(&m, m.pass_count(), black_box(&phi64)).unwrap())
    });
    c.bench_function("jacobi_eigen/16", |b| b.iter(|| jacobi_eigen(black_box(&phi16)).unwrap()));
    c.bench_function("jacobi_eigen/64", |b| b.iter(|| jacobi_eigen(black_box(&phi64)).unwrap()));
    c.bench_function("greedy_init/64x3", |b| b.iter(|| greedy_init(black_box(&phi64), 6, 3).unwrap()));
}

fn training(c: &mut Criterion) {
    let phi = ar1_covariance_2d(4, 0.95).unwrap();
    let config = OptimizerConfig { restarts: 1, max_sweeps: 5, parallel: false, ..Default::default() };
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    g.bench_function("16x2", |b| b.iter(|| optimize(black_box(&phi), 4, 2, &config).unwrap()));
    g.finish();
}

criterion_group!(benches, float_forward, fixed_forward, statistics, training);
criterion_main!(benches);
