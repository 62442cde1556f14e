//! Sequential versus data-parallel execution of the hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use klbound::exec::Execution;
use klbound::experiments::{violation_experiment_with, ExperimentConfig};
use klbound::moment::{c_n_with, xi_exact_with, SampleSize};
use std::hint::black_box;
use std::path::PathBuf;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut modes = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        modes.push(("parallel", Execution::Parallel));
    }
    modes
}

fn xi(c: &mut Criterion) {
    let mut group = c.benchmark_group("xi_exact");
    for n in [10_000u64, 1_000_000] {
        let size = SampleSize::new(n).unwrap();
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, n), &size, |b, &size| {
                b.iter(|| xi_exact_with(black_box(size), exec))
            });
        }
    }
    group.finish();
}

fn riemann_constant(c: &mut Criterion) {
    let mut group = c.benchmark_group("c_n");
    let size = SampleSize::new(1_000_000).unwrap();
    for (name, exec) in modes() {
        group.bench_function(name, |b| b.iter(|| c_n_with(black_box(size), exec).unwrap()));
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/experiment_optimized.json");
    let config = ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mut group = c.benchmark_group("violation_experiment");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| violation_experiment_with(black_box(&config), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, xi, riemann_constant, experiment);
criterion_main!(benches);
