use std::hint::black_box;

use confluxlab::daap::builtin;
use confluxlab::factor::{getrf_seq, potrf_seq, FactorConfig};
use confluxlab::{conflux, parse_daap, program_bound, DenseMatrix, GridSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sequential_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("sequential");
    for n in [64, 128] {
        let a = DenseMatrix::random(n, n, 1);
        let s = DenseMatrix::random_spd(n, 1);
        group.bench_with_input(BenchmarkId::new("getrf", n), &a, |b, a| b.iter(|| getrf_seq(black_box(a)).unwrap()));
        group.bench_with_input(BenchmarkId::new("potrf", n), &s, |b, s| b.iter(|| potrf_seq(black_box(s)).unwrap()));
    }
    group.finish();
}

fn simulated_lu(c: &mut Criterion) {
    let mut group = c.benchmark_group("conflux");
    group.sample_size(10);
    let grid = GridSpec::new(2, 2, 2).unwrap();
    for n in [64, 128] {
        let a = DenseMatrix::random(n, n, 1);
        let cfg = FactorConfig::new(grid, n).with_block(8);
        group.bench_with_input(BenchmarkId::new("2x2x2", n), &a, |b, a| b.iter(|| conflux(black_box(a), &cfg).unwrap()));
    }
    group.finish();
}

fn bound_derivation(c: &mut Criterion) {
    let lu = parse_daap(builtin::LU).unwrap();
    c.bench_function("derive_lu", |b| b.iter(|| program_bound(black_box(&lu), 64.0).unwrap()));
}

criterion_group!(benches, sequential_kernels, simulated_lu, bound_derivation);
criterion_main!(benches);
