//! Parallel vs sequential trial loop on a generated network.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnet_ear::experiment::sample_demands;
use qnet_ear::failure::sample_domains;
use qnet_ear::network::{generate_random_network, GeneratorParams};
use qnet_ear::routing::{run_trials, run_trials_sequential};

fn bench_trials(c: &mut Criterion) {
    let seed = 7;
    let params = GeneratorParams { node_count: 100, edge_probability: 0.08, ..Default::default() };
    let net = generate_random_network(&params, seed).unwrap();
    let demands = sample_demands(&net, 20, seed).unwrap();

    let mut group = c.benchmark_group("run_trials");
    for m in [50usize, 200] {
        let domains = sample_domains(&net, m, 8.0, seed).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", m), &domains, |b, d| {
            b.iter(|| run_trials(&net, &demands, d, 1.0, seed).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &domains, |b, d| {
            b.iter(|| run_trials_sequential(&net, &demands, d, 1.0, seed).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
