use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use shopform::evaluator::{evaluate_candidate, Candidate};
use shopform::generator::{build_dataset, default_mix, DatasetItem};
use shopform::parallel::{map_parallel, map_sequential};
use shopform::solver::{solve, SolveConfig};

fn sweeps(c: &mut Criterion) {
    let config = SolveConfig { time_limit: Duration::from_secs(5), ..SolveConfig::default() };
    let items = build_dataset(100, 1, &default_mix(), &config).expect("dataset builds");

    let mut group = c.benchmark_group("solve_dataset");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| map_sequential(&items, |i| solve(&i.instance, &config))));
    group.bench_function("parallel", |b| b.iter(|| map_parallel(&items, |i| solve(&i.instance, &config))));
    group.finish();

    let evaluate = |i: &DatasetItem| evaluate_candidate(&Candidate::Bundle(i.bundle.clone()), i, &config);
    let mut group = c.benchmark_group("evaluate_references");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| map_sequential(&items, evaluate)));
    group.bench_function("parallel", |b| b.iter(|| map_parallel(&items, evaluate)));
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
