use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rtgmi::prediction::{predictor_coefficients_with, PredictorSpec, Solver};
use rtgmi::psk::{generate_codebook, make_constellation, random_codeword, stationary_block};
use rtgmi::{decode, generate_path, lambda_hat, psk_capacity, FadingModel};

fn fading(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate_path");
    for (name, model) in [
        ("ar1", FadingModel::ar1(0.99).unwrap()),
        ("clarke", FadingModel::clarke(0.01).unwrap()),
    ] {
        g.bench_function(BenchmarkId::new(name, 100_000), |b| {
            b.iter(|| generate_path(black_box(&model), 100_000, 1).unwrap())
        });
    }
    g.finish();
}

fn gmi_kernels(c: &mut Criterion) {
    let pts = make_constellation(4).unwrap();
    let white = FadingModel::ar1(0.0).unwrap();
    let cw = random_codeword(&pts, 100_000, 1);
    let block = stationary_block(&cw, &pts, &white, &white, 1.0, 2).unwrap();
    c.bench_function("lambda_hat/qpsk/100000", |b| {
        b.iter(|| lambda_hat(black_box(-1.0), &block, &pts).unwrap())
    });
    c.bench_function("psk_capacity/qpsk/100000", |b| {
        b.iter(|| psk_capacity(4, black_box(1.0), 100_000, 3).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let pts = make_constellation(4).unwrap();
    let white = FadingModel::ar1(0.0).unwrap();
    let cb = generate_codebook(&pts, 1024, 64, 4).unwrap();
    let block = stationary_block(cb.codeword(0), &pts, &white, &white, 1.0, 5).unwrap();
    c.bench_function("decode/M1024/K64", |b| {
        b.iter(|| decode(&cb, black_box(&block), &pts, 0).unwrap())
    });
}

fn prediction(c: &mut Criterion) {
    let model = FadingModel::clarke(0.05).unwrap();
    let spec = PredictorSpec::contiguous(32, 10.0).unwrap();
    let mut g = c.benchmark_group("predictor_p32");
    for (name, solver) in [("levinson", Solver::Levinson), ("dense", Solver::Dense)] {
        g.bench_function(name, |b| {
            b.iter(|| predictor_coefficients_with(&model, black_box(&spec), solver).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fading, gmi_kernels, decoding, prediction);
criterion_main!(benches);
