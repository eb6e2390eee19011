use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

use duty_bench::linear_config;
use duty_core::duty::{evaluate, BaselineHumility, DutyInputs};
use duty_core::monte_carlo::simulate;
use duty_core::signal::SignalFunction;
use duty_core::verification::{default_hi_grid, run_ranking_suite};

fn bench_evaluate(c: &mut Criterion) {
    let inputs = DutyInputs::new(0.75, 0.40, 0.60).unwrap();
    let baseline = BaselineHumility::default();
    let mut group = c.benchmark_group("evaluate");
    for sf in [
        SignalFunction::Linear,
        SignalFunction::Exponential { gain: 2.0 },
        SignalFunction::logistic_default(),
    ] {
        group.bench_function(sf.form_name(), |b| {
            b.iter(|| evaluate(black_box(inputs), &sf, baseline).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    for n in [10_000u64, 100_000] {
        let cfg = linear_config(n);
        group.throughput(Throughput::Elements(n));
        group.bench_function(format!("linear_{n}"), |b| b.iter(|| simulate(black_box(&cfg))));
    }
    group.finish();
}

fn bench_ranking(c: &mut Criterion) {
    let grid = default_hi_grid();
    c.bench_function("ranking_suite_1000", |b| {
        b.iter(|| run_ranking_suite(black_box(1000), 42, &grid))
    });
}

criterion_group!(benches, bench_evaluate, bench_simulate, bench_ranking);
criterion_main!(benches);
