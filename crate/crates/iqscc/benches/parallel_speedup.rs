//! Criterion benches comparing the rayon fan-out paths against their
//! sequential equivalents at matched work sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use iqscc::detection::{cw_params, mc_validate};
use iqscc::par;

fn bench_mc_roc(c: &mut Criterion) {
    let params = cw_params(1.0, 16);
    let mut group = c.benchmark_group("mc_roc");
    for &trials in &[100_000u64, 400_000] {
        group.bench_with_input(BenchmarkId::new("sharded", trials), &trials, |b, &t| {
            b.iter(|| mc_validate(&params, 1e-2, 16, t, 7).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("single_thread_loop", trials), &trials, |b, &t| {
            // Same per-trial work, no fan-out: one shard's worth of draws
            // scaled up to the full trial count.
            b.iter(|| {
                use rand::{Rng, SeedableRng};
                use rand_distr::StandardNormal;
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
                let mut hits = 0u64;
                for _ in 0..t {
                    let mut sum = 0.0;
                    for _ in 0..16 {
                        let z: f64 = rng.sample(StandardNormal);
                        sum += 0.25 + z;
                    }
                    if sum / 16.0 > 0.2 {
                        hits += 1;
                    }
                }
                hits
            });
        });
    }
    group.finish();
}

fn bench_batch_map(c: &mut Criterion) {
    // Batch evaluation fan-out vs plain iterator on identical kernels.
    let work = |i: usize| {
        let mut acc = 0.0f64;
        for k in 1..400 {
            acc += ((i * k) as f64).sqrt().sin();
        }
        acc
    };
    let mut group = c.benchmark_group("batch_map");
    group.bench_function("par_map_indexed", |b| {
        b.iter(|| par::map_indexed(2048, work));
    });
    group.bench_function("sequential_map", |b| {
        b.iter(|| (0..2048).map(work).collect::<Vec<f64>>());
    });
    group.finish();
}

criterion_group!(benches, bench_mc_roc, bench_batch_map);
criterion_main!(benches);
