use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vrjp_core::MomentEngine;

fn moments(c: &mut Criterion) {
    let e = MomentEngine::for_c(1.0).unwrap();
    c.bench_function("psi quadrature", |b| b.iter(|| e.psi(black_box(1.3)).unwrap()));
    c.bench_function("psi closed form", |b| b.iter(|| e.psi_closed_form(black_box(1.3)).unwrap()));
    c.bench_function("t_star q1=0.5", |b| b.iter(|| e.t_star(black_box(0.5)).unwrap()));
    c.bench_function("lambda_measure q1=0.5", |b| b.iter(|| e.lambda_measure(black_box(0.5)).unwrap()));
    c.bench_function("rate_function x=0.3", |b| b.iter(|| e.rate_function(black_box(0.3)).unwrap()));
    c.bench_function("engine setup", |b| b.iter(|| MomentEngine::for_c(black_box(0.7)).unwrap()));
}

criterion_group!(benches, moments);
criterion_main!(benches);
