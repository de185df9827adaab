use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sentry_bench::random_fitness;
use sentry_core::search::{crowding_distance, fast_nondominated_sort, rank_and_crowd};

fn sorting(c: &mut Criterion) {
    let mut group = c.benchmark_group("nondominated_sort");
    for n in [50, 100, 400] {
        let fit = random_fitness(n, 20, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fit, |b, fit| {
            b.iter(|| fast_nondominated_sort(black_box(fit)))
        });
    }
    group.finish();
}

fn crowding(c: &mut Criterion) {
    let mut group = c.benchmark_group("crowding_distance");
    for n in [50, 100, 400] {
        let fit = random_fitness(n, 1000, n as u64);
        let front: Vec<usize> = (0..n).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &fit, |b, fit| {
            b.iter(|| crowding_distance(black_box(&front), black_box(fit)))
        });
    }
    group.finish();
}

fn ranking(c: &mut Criterion) {
    let fit = random_fitness(100, 20, 7);
    c.bench_function("rank_and_crowd/100", |b| {
        b.iter(|| rank_and_crowd(black_box(&fit)))
    });
}

criterion_group!(benches, sorting, crowding, ranking);
criterion_main!(benches);
