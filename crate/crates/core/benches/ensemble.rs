use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qsmpc_core::model::ModelConfig;
use qsmpc_core::pmp::OptimizerOptions;
use qsmpc_core::smpc::{closed_loop_ensemble, run_uncontrolled};
use qsmpc_core::trajectory::EnsembleOptions;

fn bench_ensembles(c: &mut Criterion) {
    let model = ModelConfig {
        t_final: 2.0,
        ..ModelConfig::three_level()
    };
    let opts = OptimizerOptions::default();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for (label, threads) in [("sequential", Some(1)), ("parallel", None)] {
        let ens = EnsembleOptions {
            threads,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("uncontrolled", label), &ens, |b, ens| {
            b.iter(|| run_uncontrolled(&model, 64, 1, ens).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("closed_loop", label), &ens, |b, ens| {
            b.iter(|| closed_loop_ensemble(&model, &opts, 16, 1, ens).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ensembles);
criterion_main!(benches);
