use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rxsat::planner::min_release_rate;
use rxsat::queueing::{symmetric_calibrate, symmetric_chain_solve, system_rejection_rate, zone_partition};
use rxsat::ScenarioConfig;

fn chain(c: &mut Criterion) {
    c.bench_function("chain_solve_10000", |b| {
        b.iter(|| symmetric_chain_solve(black_box(10_000), 0.05, 4.0))
    });
    c.bench_function("calibrate_10000", |b| {
        b.iter(|| symmetric_calibrate(black_box(1000.0), 10_000, 4.0))
    });
}

fn zones(c: &mut Criterion) {
    let cfg = ScenarioConfig::table_one();
    c.bench_function("zone_partition", |b| {
        b.iter(|| zone_partition(black_box(10_000), cfg.distance, cfg.rx_radius))
    });
    let layout = zone_partition(10_000, cfg.distance, cfg.rx_radius).unwrap();
    c.bench_function("system_rejection_rate", |b| {
        b.iter(|| system_rejection_rate(black_box(1000.0), &layout, 4.0))
    });
    c.bench_function("min_release_rate", |b| {
        b.iter(|| min_release_rate(black_box(0.3), &cfg))
    });
}

criterion_group!(benches, chain, zones);
criterion_main!(benches);
