use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dgsp_bench::{actor, world};
use dgsp_core::audit::{monotonicity_metric, test_states, AuditConfig};
use std::hint::black_box;

fn actor_passes(c: &mut Criterion) {
    let w = world();
    let round = w.round(2, 0);
    let points: Vec<(f64, &[f64])> = round
        .request
        .candidates
        .iter()
        .map(|c| (c.bid, c.features.as_slice()))
        .collect();
    let mut g = c.benchmark_group("actor");
    for hidden in [vec![16], vec![64, 32], vec![128, 64]] {
        let a = actor(&w, &hidden);
        let label = format!("{hidden:?}");
        g.bench_with_input(BenchmarkId::new("rank_score", &label), &a, |b, a| {
            b.iter(|| a.rank_score(black_box(points[0].0), points[0].1).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mono_penalty_grad", &label), &a, |b, a| {
            b.iter(|| a.mono_penalty(black_box(&points)).unwrap())
        });
        g.bench_with_input(
            BenchmarkId::new("elasticity_penalty_grad", &label),
            &a,
            |b, a| b.iter(|| a.elasticity_penalty(black_box(&points)).unwrap()),
        );
    }
    g.finish();
}

fn audit(c: &mut Criterion) {
    let w = world();
    let a = actor(&w, &[64, 32]);
    let cfg = AuditConfig {
        mono_rounds: 20,
        ..AuditConfig::default()
    };
    let states = test_states(&w, cfg.seed, cfg.mono_rounds);
    c.bench_function("monotonicity_metric_20_rounds", |b| {
        b.iter(|| monotonicity_metric(&a, black_box(&states), &cfg).unwrap())
    });
}

criterion_group!(benches, actor_passes, audit);
criterion_main!(benches);
