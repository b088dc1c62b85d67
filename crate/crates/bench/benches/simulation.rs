//! End-to-end simulator throughput in both service abstractions.

use std::hint::black_box;

use bufsim_core::sim::{self, Architecture, SimConfig, SimMode, StopCondition};
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);

    let mut queueing = SimConfig::defaults(SimMode::Queueing, Architecture::Distributed);
    queueing.stop = StopCondition::GeneratedPackets(10_000);
    group.bench_function("queueing_10k_packets", |b| {
        b.iter(|| sim::run_single(black_box(&queueing)).unwrap().served)
    });

    let mut pooled = SimConfig::defaults(SimMode::Queueing, Architecture::Common);
    pooled.stop = StopCondition::GeneratedPackets(10_000);
    group.bench_function("queueing_pooled_10k_packets", |b| {
        b.iter(|| sim::run_single(black_box(&pooled)).unwrap().served)
    });

    let mut voq = SimConfig::defaults(SimMode::Voq, Architecture::Distributed);
    voq.stop = StopCondition::GeneratedPackets(5_000);
    group.bench_function("voq_5k_packets", |b| {
        b.iter(|| sim::run_single(black_box(&voq)).unwrap().served)
    });

    group.finish();
}

criterion_group!(benches, bench_simulation);
criterion_main!(benches);
