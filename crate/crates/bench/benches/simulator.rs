use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::RngExt;
use rxsat::experiment::with_release_rate;
use rxsat::sim::octree::Octree;
use rxsat::sim::rng::{stream, Domain};
use rxsat::sim::{build_scenario, BrownianKernel};
use rxsat::{Profile, ScenarioConfig};

fn kernel(c: &mut Criterion) {
    let k = BrownianKernel::new(5e-11, 1e-4);
    let mut rng = stream(1, Domain::Molecule, 0);
    c.bench_function("brownian_displacement", |b| b.iter(|| k.displacement(&mut rng)));
}

fn stepping(c: &mut Criterion) {
    let mut cfg = with_release_rate(&Profile::Desk.apply(&ScenarioConfig::table_one()), 5000.0);
    cfg.seed = 3;
    let mut warm = build_scenario(&cfg).unwrap();
    for _ in 0..2000 {
        warm.step();
    }
    c.bench_function("desk_step", |b| b.iter(|| warm.step()));
}

fn octree(c: &mut Criterion) {
    let mut rng = stream(2, Domain::Synthetic, 0);
    let points: Vec<[f64; 3]> = (0..5000)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    c.bench_function("octree_pairs_5000", |b| {
        b.iter(|| Octree::build(black_box(&points), [0.0; 3], 1.0).pairs_within(&points, 0.01))
    });
}

criterion_group!(benches, kernel, stepping, octree);
criterion_main!(benches);
