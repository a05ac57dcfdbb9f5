use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use qcqmc_core::exact::apply_hamiltonian;
use qcqmc_core::gfmc::{green_row, run_chain, GfmcConfig};
use qcqmc_core::shots::{noisy_table, sample_counts};
use qcqmc_core::{AmplitudeTable, JastrowParams, SpinConfig, TfiModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn jastrow(l: usize) -> (TfiModel, AmplitudeTable) {
    let m = TfiModel::critical(l).unwrap();
    let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
    (m, t)
}

fn bench_green_row(c: &mut Criterion) {
    let mut group = c.benchmark_group("green_row");
    for l in [8, 12, 16] {
        let (m, t) = jastrow(l);
        let lambda = 2.0 * l as f64;
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            let mut x = 0u64;
            b.iter(|| {
                x = (x + 0x9e37) & m.mask();
                black_box(green_row(SpinConfig(x), &t, &m, lambda).unwrap().b)
            })
        });
    }
    group.finish();
}

fn bench_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_chain");
    group.sample_size(20);
    for l in [8, 12] {
        let (m, t) = jastrow(l);
        let noisy = noisy_table(&t, 30 << l, 1, 0).unwrap();
        let cfg = GfmcConfig {
            chain_length: 20_000,
            ..GfmcConfig::for_model(&m)
        };
        group.throughput(Throughput::Elements(cfg.chain_length as u64));
        group.bench_with_input(BenchmarkId::new("noisy", l), &l, |b, _| {
            b.iter(|| black_box(run_chain(&cfg, &noisy, &m).unwrap().len()))
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_counts");
    for l in [10, 14] {
        let (_, t) = jastrow(l);
        let probs = t.probabilities();
        group.throughput(Throughput::Elements(probs.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            b.iter(|| black_box(sample_counts(&probs, 30 << l, &mut rng).unwrap().shots))
        });
    }
    group.finish();
}

fn bench_matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_hamiltonian");
    for l in [12, 16, 18] {
        let (m, t) = jastrow(l);
        group.throughput(Throughput::Elements(m.dim() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, _| {
            b.iter(|| black_box(apply_hamiltonian(&m, t.amps())[0]))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_green_row, bench_chain, bench_sampling, bench_matvec);
criterion_main!(benches);
