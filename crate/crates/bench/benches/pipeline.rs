use criterion::{black_box, criterion_group, criterion_main, Criterion};
use sentry_bench::corpus_contract;
use sentry_core::corpus::bundled_corpus_dir;
use sentry_core::executor::Limits;
use sentry_core::{analyze_source, MatchPolicy, SearchConfig};

fn analysis(c: &mut Criterion) {
    let src = std::fs::read_to_string(bundled_corpus_dir().join("guarded_config.minisol")).unwrap();
    c.bench_function("analyze/guarded_config", |b| {
        b.iter(|| analyze_source(black_box(&src), "guarded_config.minisol").unwrap())
    });
}

fn interpreter(c: &mut Criterion) {
    let limits = Limits::default();
    let mut group = c.benchmark_group("execute");
    for file in [
        "reentrancy_vuln.minisol",
        "guarded_vault.minisol",
        "callstack_recursion.minisol",
    ] {
        let a = corpus_contract(file);
        let genes = a.baseline_genes();
        group.bench_function(file, |b| {
            b.iter(|| a.program.execute(black_box(&genes), &limits))
        });
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let a = corpus_contract("guarded_combo.minisol");
    let cfg = SearchConfig {
        max_iters: 20,
        seed: 1,
        ..SearchConfig::default()
    };
    let limits = Limits::default();
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    group.bench_function("guarded_combo/20_generations", |b| {
        b.iter(|| {
            a.search(&[], MatchPolicy::default(), black_box(&cfg), &limits)
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, analysis, interpreter, search);
criterion_main!(benches);
