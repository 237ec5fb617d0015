//! Benchmarks for the hot kernels: exact Shapley DP vs enumeration, the
//! water-filling optimizer, the exact OPT solver, Monte Carlo sampling, and
//! whole-partition equilibrium checks.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use poolform_core::equilibrium::{check_nash, construct_atomic_kl_equilibrium, CheckConfig};
use poolform_core::model::{GameSpec, Pool, Scheme};
use poolform_core::rewards::{shapley_dp_exact, shapley_enum_exact, shapley_oceanic_mc};
use poolform_core::sybil::waterfill_proportional;
use poolform_core::welfare::opt_atomic;

fn bench_shapley(c: &mut Criterion) {
    let mut group = c.benchmark_group("shapley");
    let pool8: Vec<i64> = vec![3, 2, 2, 1, 1, 1, 1, 1];
    group.bench_function("dp_8", |b| {
        b.iter(|| shapley_dp_exact(black_box(&pool8), black_box(6)))
    });
    group.bench_function("enum_8", |b| {
        b.iter(|| shapley_enum_exact(black_box(&pool8), black_box(6)).unwrap())
    });
    let pool16: Vec<i64> = (0..16).map(|i| 1 + (i % 3)).collect();
    group.bench_function("dp_16", |b| {
        b.iter(|| shapley_dp_exact(black_box(&pool16), black_box(9)))
    });
    group.finish();
}

fn bench_waterfill(c: &mut Criterion) {
    let stakes: Vec<f64> = (0..1000).map(|i| 4.0 + (i % 17) as f64).collect();
    c.bench_function("waterfill_1000_pools", |b| {
        b.iter(|| waterfill_proportional(black_box(&stakes), black_box(35.0)))
    });
}

fn bench_opt(c: &mut Criterion) {
    let stakes = vec![3.0, 3.0, 2.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let game = GameSpec::new(4.0, stakes, 0.0).unwrap();
    c.bench_function("opt_atomic_16", |b| {
        b.iter(|| opt_atomic(black_box(&game), 20))
    });
}

fn bench_monte_carlo(c: &mut Criterion) {
    let game = GameSpec::new(3.0, vec![2.0, 1.5, 1.0], 2.5).unwrap();
    let pool = Pool::with_ocean([1, 2, 3], 2.5);
    c.bench_function("oceanic_mc_100k", |b| {
        b.iter(|| shapley_oceanic_mc(black_box(&pool), black_box(&game), 100_000, 7).unwrap())
    });
}

fn bench_check_nash(c: &mut Criterion) {
    let mut stakes = vec![2.0; 2];
    stakes.extend(std::iter::repeat_n(1.0, 59));
    let game = GameSpec::new(4.0, stakes, 0.0).unwrap();
    let construction = construct_atomic_kl_equilibrium(&game).unwrap();
    let cfg = CheckConfig::default();
    c.bench_function("check_nash_kl_61_players", |b| {
        b.iter(|| check_nash(black_box(&construction.partition), &game, Scheme::Shapley, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_shapley,
    bench_waterfill,
    bench_opt,
    bench_monte_carlo,
    bench_check_nash
);
criterion_main!(benches);
