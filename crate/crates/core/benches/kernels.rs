use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use spamm_core::bench::generated_start;
use spamm_core::errorctl::{cse_with, truncate, ToleranceGrid};
use spamm_core::multiply::{multiply_exact_with, spamm_with, SpammTolerance};
use spamm_core::oracle::DecayModelSpec;
use spamm_core::{Exec, QuadTreeMatrix};

const SIZES: [usize; 2] = [256, 512];
const EXECS: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn input(n: usize) -> QuadTreeMatrix {
    let x = generated_start(&DecayModelSpec::new(n, 0.5, 42), 32).unwrap();
    truncate(&x, 1e-8).matrix
}

fn kernels(c: &mut Criterion) {
    let grid = ToleranceGrid::default();
    let tau = SpammTolerance::new(1e-6).unwrap();
    for n in SIZES {
        let x = input(n);
        let mut group = c.benchmark_group(format!("n{n}"));
        group.sample_size(20);
        for (name, exec) in EXECS {
            group.bench_with_input(BenchmarkId::new("multiply_exact", name), &x, |b, x| {
                b.iter(|| multiply_exact_with(black_box(x), black_box(x), exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("spamm", name), &x, |b, x| {
                b.iter(|| spamm_with(black_box(x), black_box(x), tau, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("cse", name), &x, |b, x| {
                b.iter(|| cse_with(black_box(x), black_box(x), &grid, exec).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
