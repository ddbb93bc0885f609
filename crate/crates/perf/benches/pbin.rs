use std::hint::black_box;

use atfcm_cli::commands::bench::presences;
use atfcm_core::occupancy::{congestion_pmf_direct, congestion_pmf_enumerated, congestion_pmf_fft};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pbin(c: &mut Criterion) {
    let mut group = c.benchmark_group("pbin");
    for n in [4usize, 8, 12, 16, 32, 64, 128, 300, 512] {
        let p = presences(n);
        if n <= 12 {
            group.bench_with_input(BenchmarkId::new("enumerated", n), &p, |b, p| {
                b.iter(|| congestion_pmf_enumerated(black_box(p)))
            });
        }
        group.bench_with_input(BenchmarkId::new("direct", n), &p, |b, p| {
            b.iter(|| congestion_pmf_direct(black_box(p), usize::MAX))
        });
        group.bench_with_input(BenchmarkId::new("fft", n), &p, |b, p| b.iter(|| congestion_pmf_fft(black_box(p))));
    }
    group.finish();
}

criterion_group!(benches, pbin);
criterion_main!(benches);
