use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vrslice_bench::heterogeneous_scales;
use vrslice_core::laplace::{aggregate_distribution, DEFAULT_CLUSTER_TOL};
use vrslice_core::sim::SIM_CLUSTER_TOL;

fn mixture(c: &mut Criterion) {
    let users = heterogeneous_scales();
    let distinct = aggregate_distribution(&users, DEFAULT_CLUSTER_TOL).unwrap();
    c.bench_function("mixture/build", |b| {
        b.iter(|| aggregate_distribution(black_box(&users), SIM_CLUSTER_TOL).unwrap())
    });
    c.bench_function("mixture/quantile_p0.99", |b| {
        b.iter(|| distinct.quantile(black_box(0.99)).unwrap())
    });

    // Equal scales collapse into one repeated pole.
    let repeated = aggregate_distribution(&[(0.0, 1.5); 6], DEFAULT_CLUSTER_TOL).unwrap();
    c.bench_function("mixture/repeated_quantile_p0.99", |b| {
        b.iter(|| repeated.quantile(black_box(0.99)).unwrap())
    });
}

criterion_group!(benches, mixture);
criterion_main!(benches);
