use std::hint::black_box;

use cart_bench::fixture;
use cart_core::diagnostics::{correlation_report, isotonic_fit};
use cart_core::knn::{cross_validate_k, KnnModel, DEFAULT_K_GRID};
use cart_core::pruning::prune_path;
use cart_core::tree::{best_split, grow};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn split_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("best_split");
    for n in [1_000, 10_000] {
        let ds = fixture(n, 20, 1);
        let rows: Vec<usize> = (0..n).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &rows, |b, rows| b.iter(|| best_split(&ds, black_box(rows))));
    }
    group.finish();
}

fn growing(c: &mut Criterion) {
    let mut group = c.benchmark_group("grow");
    group.sample_size(20);
    for d in [5, 50] {
        let ds = fixture(1_000, d, 2);
        group.bench_with_input(BenchmarkId::new("depth10", d), &ds, |b, ds| b.iter(|| grow(ds, 10)));
    }
    group.finish();
}

fn pruning(c: &mut Criterion) {
    let ds = fixture(2_000, 10, 3);
    let tree = grow(&ds, 11);
    c.bench_function("prune_path", |b| b.iter(|| prune_path(black_box(&tree))));
}

fn diagnostics(c: &mut Criterion) {
    let y: Vec<f64> = fixture(10_000, 1, 4).response().to_vec();
    c.bench_function("isotonic_fit_10k", |b| b.iter(|| isotonic_fit(black_box(&y))));
    let ds = fixture(500, 5, 5);
    let tree = grow(&ds, 6);
    let mut group = c.benchmark_group("correlation_report");
    group.sample_size(10);
    group.bench_function("n500_depth6", |b| b.iter(|| correlation_report(&tree, &ds)));
    group.finish();
}

fn knn(c: &mut Criterion) {
    let train = fixture(1_000, 20, 6);
    let test = fixture(200, 20, 7);
    let model = KnnModel::new(&train, 10).expect("k within range");
    c.bench_function("knn_test_error_k10", |b| b.iter(|| model.test_error(black_box(&test))));
    let mut group = c.benchmark_group("knn_cv");
    group.sample_size(10);
    group.bench_function("n1000_5fold", |b| b.iter(|| cross_validate_k(&train, &DEFAULT_K_GRID, 5, 8)));
    group.finish();
}

criterion_group!(benches, split_search, growing, pruning, diagnostics, knn);
criterion_main!(benches);
