use std::hint::black_box;

use bec_bench::{bump, bump_3d, interacting, line, oscillator};
use bec_core::{
    chaos_report, drift_mismatch, minimize_nbody, minimize_nls, nbody_drift, sample_density, scattering_length,
    simulate, FlowParams, SdeParams,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn nls(c: &mut Criterion) {
    let mut group = c.benchmark_group("nls");
    let flow = FlowParams::default();
    for points in [129, 257, 513] {
        group.bench_with_input(BenchmarkId::from_parameter(points), &points, |b, &n| {
            b.iter(|| minimize_nls(&oscillator(), 1.0, line(n), &flow).unwrap())
        });
    }
    group.finish();
}

fn nbody(c: &mut Criterion) {
    let mut group = c.benchmark_group("nbody");
    group.sample_size(10);
    let flow = FlowParams::default();
    let v0 = bump(2.0);
    for (particles, points) in [(2, 65), (3, 33), (4, 17)] {
        group.bench_function(BenchmarkId::new(format!("N={particles}"), points), |b| {
            b.iter(|| minimize_nbody(&oscillator(), &v0, particles, 0.5, line(points), &flow).unwrap())
        });
    }
    group.finish();
}

fn scattering(c: &mut Criterion) {
    let v0 = bump_3d(1.0);
    c.bench_function("scattering_length", |b| {
        b.iter(|| scattering_length(|r| 16.0 * v0.eval(4.0 * r), 0.25).unwrap())
    });
}

fn diagnostics(c: &mut Criterion) {
    let (state, nls) = interacting(3, 33);
    c.bench_function("drift_mismatch/N=3", |b| b.iter(|| drift_mismatch(black_box(&state), &nls).unwrap()));

    let sde = SdeParams::new(1e-3, 0.1, 500, 7).unwrap();
    c.bench_function("chaos_report/N=3", |b| b.iter(|| chaos_report(&state, &nls, 0.1, &sde).unwrap()));

    let drift = nbody_drift(&state).unwrap();
    let start = sample_density(&state.density(), sde.trajectories, sde.seed).unwrap();
    let mut group = c.benchmark_group("nelson");
    group.sample_size(10);
    group.bench_function("simulate/N=3", |b| b.iter(|| simulate(&drift, &start, &sde).unwrap()));
    group.finish();
}

criterion_group!(benches, nls, nbody, scattering, diagnostics);
criterion_main!(benches);
