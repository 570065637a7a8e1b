use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use pathsolve_bench::{brownian, identity, mean_reverting, sign, skew, tabulated};
use pathsolve_core::ofe::solve_caratheodory;
use pathsolve_core::pathkit::{gen_brownian, uniform_grid};
use std::hint::black_box;

fn theta(c: &mut Criterion) {
    let mut group = c.benchmark_group("theta");
    let ws: Vec<f64> = (0..1024).map(|i| -3.0 + 6.0 * i as f64 / 1023.0).collect();
    group.throughput(Throughput::Elements(ws.len() as u64));
    for (name, t) in [("skew", skew()), ("tabulated", tabulated())] {
        group.bench_function(name, |b| {
            b.iter(|| ws.iter().map(|&w| t.theta(black_box(w)).unwrap()).sum::<f64>())
        });
    }
    group.finish();
}

fn brownian_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("gen_brownian");
    for steps in [1usize << 10, 1 << 16] {
        let grid = uniform_grid(1.0, steps).unwrap();
        group.throughput(Throughput::Elements(steps as u64));
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| gen_brownian(black_box(grid), 7).unwrap())
        });
    }
    group.finish();
}

fn caratheodory(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_caratheodory");
    let map = identity(0.0);
    for (name, drift) in [("neg_x", mean_reverting()), ("sign", sign())] {
        for steps in [1usize << 10, 1 << 12] {
            let w = brownian(steps, 7);
            group.bench_with_input(BenchmarkId::new(name, steps), &w, |b, w| {
                b.iter_batched(
                    || drift.clone(),
                    |d| solve_caratheodory(&d, w, &map, 16, 1e-6).unwrap(),
                    BatchSize::SmallInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, theta, brownian_paths, caratheodory);
criterion_main!(benches);
