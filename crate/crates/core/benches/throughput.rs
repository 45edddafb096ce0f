use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cwsoc::hs_oracle::HsEnsemble;
use cwsoc::sampler::{importance_sample_with, metropolis_sweep, run_chains_with, SamplerConfig};
use cwsoc::{BaseMeasure, Configuration, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    for spec in ["rademacher", "gaussian:1", "uniform:1"] {
        let m: BaseMeasure = spec.parse().unwrap();
        let n = 1600;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut config = Configuration::sample(&m, n, &mut rng).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(spec, |b| b.iter(|| metropolis_sweep(&mut config, &m, &mut rng)));
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let mut group = c.benchmark_group("chains");
    group.sample_size(10);
    let cfg = SamplerConfig {
        n: 400,
        measure: BaseMeasure::gaussian(1.0).unwrap(),
        sweeps: 2_000,
        burn_in_sweeps: 100,
        thin_sweeps: 1,
        seed: 5,
        chains: 4,
    };
    group.throughput(Throughput::Elements(cfg.chains as u64 * (cfg.sweeps + cfg.burn_in_sweeps) * cfg.n as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("run_chains", name), &exec, |b, exec| {
            b.iter(|| run_chains_with(&cfg, *exec).unwrap())
        });
    }
    group.finish();
}

fn importance(c: &mut Criterion) {
    let mut group = c.benchmark_group("importance");
    group.sample_size(10);
    let m = BaseMeasure::rademacher();
    let draws = 1 << 16;
    group.throughput(Throughput::Elements(draws as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("n=100", name), &exec, |b, exec| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(2);
                importance_sample_with(100, &m, draws, &mut rng, *exec).unwrap()
            })
        });
    }
    group.finish();
}

fn hs_profile(c: &mut Criterion) {
    let mut group = c.benchmark_group("hs_partition_ratio");
    group.sample_size(10);
    let m = BaseMeasure::gaussian(1.0).unwrap();
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("n=1000,draws=512", name), &exec, |b, exec| {
            b.iter(|| {
                HsEnsemble::new(1000, m.clone(), 512, 3).unwrap().with_execution(*exec).partition_ratio().unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, chains, importance, hs_profile);
criterion_main!(benches);
