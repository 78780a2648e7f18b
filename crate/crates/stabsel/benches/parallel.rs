//! Parallel vs sequential throughput on the two data-parallel hot paths:
//! the selection-frequency engine and the score-model Monte Carlo sweep.
//!
//! With the `parallel` feature (default) each workload runs once in a
//! single-thread pool and once with all cores; without the feature only the
//! sequential path exists and is measured alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use stabsel::engine;
use stabsel::scoremodel::{error_frequency, NoiseLaw, ScoreModelConfig};
use stabsel::synth::{DesignKind, DesignSampler, DesignSpec};
use stabsel::{BaseSelector, Dataset, EngineConfig};

fn engine_workload() -> (Dataset, EngineConfig) {
    let mut spec = DesignSpec::new(DesignKind::Toeplitz, 120, 200, 8.0, 3);
    spec.n_informative = 10;
    let (ds, _) = DesignSampler::new(spec).unwrap().draw(1).unwrap();
    let cfg = EngineConfig::new(6, 2, 2, 0.6, BaseSelector::Lasso { q: 8 }, 17);
    (ds, cfg)
}

fn score_workload() -> ScoreModelConfig {
    let mut cfg = ScoreModelConfig::new(NoiseLaw::Cauchy, 11);
    cfg.dims = vec![100, 1000, 5000];
    cfg.trials = 2000;
    cfg
}

#[cfg(feature = "parallel")]
fn thread_counts() -> Vec<usize> {
    vec![1, 0] // 0 = all cores
}

#[cfg(not(feature = "parallel"))]
fn thread_counts() -> Vec<usize> {
    vec![1]
}

fn label(threads: usize) -> String {
    match threads {
        0 => "all-cores".to_string(),
        n => format!("{n}-thread"),
    }
}

fn bench_engine(c: &mut Criterion) {
    let (ds, base_cfg) = engine_workload();
    let mut group = c.benchmark_group("engine_select");
    group.sample_size(10);
    for threads in thread_counts() {
        let mut cfg = base_cfg.clone();
        cfg.parallelism = threads;
        group.bench_with_input(BenchmarkId::from_parameter(label(threads)), &cfg, |b, cfg| {
            b.iter(|| engine::run(black_box(&ds), black_box(cfg)).unwrap());
        });
    }
    group.finish();
}

fn bench_score_model(c: &mut Criterion) {
    let cfg = score_workload();
    let mut group = c.benchmark_group("score_model_sweep");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_with_input(
            BenchmarkId::from_parameter(label(threads)),
            &threads,
            |b, &threads| {
                b.iter(|| run_in_pool(threads, || error_frequency(black_box(&cfg)).unwrap()));
            },
        );
    }
    group.finish();
}

#[cfg(feature = "parallel")]
fn run_in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        0 => f(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_in_pool<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

criterion_group!(benches, bench_engine, bench_score_model);
criterion_main!(benches);
