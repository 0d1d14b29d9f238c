//! Parallel-vs-sequential comparison of the embarrassingly parallel sweeps.
//!
//! The `parallel` feature (on by default) routes `par::par_map` through
//! rayon; the sequential baselines here call the per-item entry points in a
//! plain loop, so one bench run shows the speedup on the same build.

use criterion::{criterion_group, criterion_main, Criterion};

use dpnls::eta::EtaZero;
use dpnls::mass;
use dpnls::model::ModelParams;
use dpnls::par;
use dpnls::unstable;

fn bench_mass_curve(c: &mut Criterion) {
    let params = ModelParams::new(2.0, 3.5).unwrap();
    let omegas: Vec<f64> = (1..=16).map(|i| 0.01 * i as f64).collect();
    let mut group = c.benchmark_group("mass_curve_16_frequencies");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| mass::mass_curve(&omegas, &params).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            omegas
                .iter()
                .map(|&omega| mass::mass_report(omega, &params).unwrap())
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

fn bench_quadform_schedule(c: &mut Criterion) {
    let params = ModelParams::new(2.0, 3.5).unwrap();
    let ell = params.characteristic_length();
    let schedule: Vec<f64> = [12.5, 25.0, 50.0, 100.0].iter().map(|r| r * ell).collect();
    let e = EtaZero::new(params).unwrap();
    let mut group = c.benchmark_group("quadform_schedule_4_scales");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            par::par_map(schedule.clone(), |r| unstable::quadform_terms(r, &e).unwrap())
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            schedule
                .iter()
                .map(|&r| unstable::quadform_terms(r, &e).unwrap())
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_mass_curve, bench_quadform_schedule);
criterion_main!(benches);
