//! Sequential vs data-parallel execution of the crate's batch kernels.
//!
//! Run with `cargo bench --bench exec_modes` (parallel feature on by
//! default) and `cargo bench --bench exec_modes --no-default-features`
//! for the sequential-only build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use weighted_clt::exec::{map_indexed, ExecPolicy};
use weighted_clt::rng::stream_rng;
use weighted_clt::DistributionSpec;

fn policies() -> Vec<(&'static str, ExecPolicy)> {
    vec![
        ("sequential", ExecPolicy::Sequential),
        ("parallel", ExecPolicy::Parallel),
    ]
}

fn bench_weight_sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("weight_batches");
    for (name, policy) in policies() {
        g.bench_with_input(
            BenchmarkId::new("sample_256x512", name),
            &policy,
            |b, &p| {
                b.iter(|| {
                    let sums = map_indexed(p, 256, |rep| {
                        let mut rng = stream_rng(7, rep as u64);
                        let mut s = 0.0;
                        for _ in 0..512 {
                            let (a, b) = weighted_clt::rng::normal_pair(&mut rng);
                            s += a * a + b * b;
                        }
                        s
                    });
                    black_box(sums.iter().sum::<f64>())
                })
            },
        );
    }
    g.finish();
}

fn bench_moment_tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("moment_tables");
    let law = DistributionSpec::rademacher_product(3);
    for (name, policy) in policies() {
        g.bench_with_input(BenchmarkId::new("cumulants_64", name), &policy, |b, &p| {
            b.iter(|| {
                let tables = map_indexed(p, 64, |_| law.law().cumulants(6).unwrap());
                black_box(tables.len())
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_weight_sampling, bench_moment_tables);
criterion_main!(benches);
