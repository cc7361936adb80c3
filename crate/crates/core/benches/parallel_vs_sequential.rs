use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ticlab::equilibrium::{dyadic_grid, EquilibriumCheck};
use ticlab::precommit::{self, OptimizerSettings};
use ticlab::suite::{self, SuiteConfig};
use ticlab::{verify_equilibrium, DyadicSchedule, Execution, PiecewiseControl};

const MODES: [(&str, Execution); 2] =
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn spike_test(c: &mut Criterion) {
    let hat = PiecewiseControl::alpha_hat(&DyadicSchedule::default());
    let grid = dyadic_grid(6);
    let mut group = c.benchmark_group("verify_equilibrium_alpha_hat");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, execution) in MODES {
        let check = EquilibriumCheck { execution, ..EquilibriumCheck::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| verify_equilibrium(&hat, &grid, &check).expect("check runs"))
        });
    }
    group.finish();
}

fn restarts(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximize_f_restarts");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, execution) in MODES {
        let settings = OptimizerSettings { depth: 8, restarts: 8, execution, ..OptimizerSettings::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| precommit::maximize_f(&settings).expect("optimizer runs"))
        });
    }
    group.finish();
}

fn identity_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("self_interaction_identity");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, execution) in MODES {
        let config = SuiteConfig { controls: 50, execution, ..SuiteConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| suite::self_interaction_identity(&config))
        });
    }
    group.finish();
}

criterion_group!(benches, spike_test, restarts, identity_suite);
criterion_main!(benches);
