//! Parallel-vs-sequential throughput of the data-parallel pipelines.
//!
//! With the default `parallel` feature the `auto` measurements run on the
//! rayon pool and the `seq` ones force the sequential fallback; built with
//! `--no-default-features` the two coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rabi_cp::dynamics::{evolve_exact, InterferometerParams};
use rabi_cp::estimation::{monte_carlo_fit_rmse, MeasurementSchedule, NoiseModel};
use rabi_cp::exec::Strategy;
use rabi_cp::experiments::{run_fig1_with, run_scaling_with, ExperimentConfig};
use rabi_cp::spin_states::make_css;

fn bench_monte_carlo(c: &mut Criterion) {
    let state_m = make_css(400).unwrap().moments();
    let p = InterferometerParams::reference();
    let schedule = MeasurementSchedule::uniform_first_period(&p, 10, 10).unwrap();
    let noise = NoiseModel::new(0.0, 40.0).unwrap();
    let mut group = c.benchmark_group("monte_carlo_fit_rmse");
    group.sample_size(10);
    for (label, strategy) in [("auto", Strategy::Auto), ("seq", Strategy::Sequential)] {
        group.bench_with_input(BenchmarkId::new(label, 256), &strategy, |b, &strategy| {
            b.iter(|| {
                monte_carlo_fit_rmse(
                    black_box(&state_m),
                    &p,
                    &schedule,
                    &noise,
                    7,
                    256,
                    (1.0, 8.0),
                    strategy,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_fig1_rows(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        particles: 500,
        d_grid_m: (0..6).map(|i| 3.0e-6 + 1.0e-6 * i as f64).collect(),
        ..Default::default()
    };
    let mut group = c.benchmark_group("fig1_grid");
    group.sample_size(10);
    for (label, strategy) in [("auto", Strategy::Auto), ("seq", Strategy::Sequential)] {
        group.bench_with_input(BenchmarkId::new(label, 6), &strategy, |b, &strategy| {
            b.iter(|| run_fig1_with(black_box(&cfg), strategy).unwrap())
        });
    }
    group.finish();
}

fn bench_scaling(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let mut group = c.benchmark_group("scaling_study");
    group.sample_size(10);
    for (label, strategy) in [("auto", Strategy::Auto), ("seq", Strategy::Sequential)] {
        group.bench_with_input(BenchmarkId::new(label, 6), &strategy, |b, &strategy| {
            b.iter(|| run_scaling_with(black_box(&cfg), strategy).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let state = make_css(1000).unwrap();
    let p = InterferometerParams::reference();
    let t = p.rabi_period();
    c.bench_function("evolve_exact_n1000_one_period", |b| {
        b.iter(|| evolve_exact(black_box(&state), &p, t, 2.09e-3).unwrap())
    });
}

criterion_group!(
    benches,
    bench_monte_carlo,
    bench_fig1_rows,
    bench_scaling,
    bench_evolve
);
criterion_main!(benches);
