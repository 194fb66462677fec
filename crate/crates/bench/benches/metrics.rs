use criterion::{criterion_group, criterion_main, Criterion};
use exportscore::analytics::location_quotients;
use exportscore::metrics::{pr_auc, roc_auc, spearman};

fn scores(n: usize) -> (Vec<f64>, Vec<bool>) {
    // deterministic scrambled scores with label-dependent shift
    let s: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(2654435761) % 10007) as f64 / 10007.0).collect();
    let y: Vec<bool> = s.iter().enumerate().map(|(i, v)| v + (i % 7) as f64 / 14.0 > 0.7).collect();
    (s, y)
}

fn curves(c: &mut Criterion) {
    let (s, y) = scores(100_000);
    let other: Vec<f64> = s.iter().map(|v| (v * 7.0).fract()).collect();
    c.bench_function("roc_auc_100k", |b| b.iter(|| roc_auc(&s, &y).unwrap()));
    c.bench_function("pr_auc_100k", |b| b.iter(|| pr_auc(&s, &y).unwrap()));
    c.bench_function("spearman_100k", |b| b.iter(|| spearman(&s, &other).unwrap()));
}

fn quotients(c: &mut Criterion) {
    let firms: Vec<(String, bool)> = (0..20_000).map(|i| (format!("R{:02}", i % 22), i % 3 == 0)).collect();
    let mut g = c.benchmark_group("location_quotients");
    g.sample_size(10);
    g.bench_function("20k_firms_1000_reps", |b| b.iter(|| location_quotients(&firms, 1000, 5)));
    g.finish();
}

criterion_group!(benches, curves, quotients);
criterion_main!(benches);
