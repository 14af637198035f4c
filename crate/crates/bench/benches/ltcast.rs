use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ltcast_core::optimizer::{compare_schemes, min_avg_latency, minmax_latency};
use ltcast_core::simulator::{monte_carlo, run_trial};
use ltcast_core::{make_distribution, ClusterSpec, Scenario, SimulationOptions};

fn two_decoding() -> Scenario {
    Scenario::new(vec![ClusterSpec::decoding(0.98, 0.0), ClusterSpec::decoding(0.63, 0.5)]).unwrap()
}

fn mixed_reference() -> Scenario {
    Scenario::new(vec![ClusterSpec::decoding(0.8, 0.0), ClusterSpec::nondecoding(0.4, 0.0)]).unwrap()
}

fn optimizers(c: &mut Criterion) {
    let s = two_decoding();
    c.bench_function("minmax_latency/grid1001", |b| b.iter(|| minmax_latency(black_box(&s)).unwrap()));
    c.bench_function("compare_schemes/grid1001", |b| b.iter(|| compare_schemes(black_box(&s)).unwrap()));

    let mixed = Scenario::new(vec![
        ClusterSpec::decoding(0.8, 0.1).with_count(3),
        ClusterSpec::nondecoding(0.5, 0.2).with_count(5),
    ])
    .unwrap()
    .with_grid(401)
    .unwrap();
    c.bench_function("min_avg_latency/p1grid50", |b| b.iter(|| min_avg_latency(black_box(&mixed), 50).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let s = mixed_reference();
    let dist = make_distribution(&[0.4878, 0.0, 0.0, 0.4878, 0.0244]).unwrap();
    c.bench_function("run_trial/k800", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            run_trial(&s, &dist, 800, seed, None).unwrap()
        })
    });
    c.bench_function("monte_carlo/k800x100", |b| {
        b.iter(|| monte_carlo(&s, &dist, 800, 100, 0, SimulationOptions::default()).unwrap())
    });
}

criterion_group!(benches, optimizers, simulation);
criterion_main!(benches);
