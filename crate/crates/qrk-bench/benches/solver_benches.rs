use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use qrk_core::linalg::{sample_without_replacement, sigma_min_rows};
use qrk_core::problem::{gen_gaussian_system, GenSpec, XStarPolicy};
use qrk_core::quantile::q_quantile;
use qrk_core::solvers::{solve, SolverConfig, Variant};
use qrk_core::SeedRng;

fn bench_quantile_selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("q_quantile");
    let mut rng = SeedRng::new(1);
    for &len in &[1_000usize, 10_000, 100_000] {
        let values: Vec<f64> = (0..len).map(|_| rng.gen_gaussian().abs()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(len), &values, |b, v| {
            b.iter(|| q_quantile(black_box(v), 0.9).unwrap())
        });
    }
    group.finish();
}

fn bench_solver_steps(c: &mut Criterion) {
    let sys = gen_gaussian_system(&GenSpec {
        m: 5_000,
        n: 50,
        beta: 1e-3,
        corruption_magnitude: 10.0,
        signed_corruption: false,
        x_star_policy: XStarPolicy::GaussianUnit,
        seed: 7,
    })
    .unwrap();

    let mut group = c.benchmark_group("solve_100_iters");
    group.sample_size(10);
    for (label, variant) in [
        ("rk", Variant::Rk),
        ("sqrk_a1", Variant::Sqrk { q: 0.9, alpha: 1.0 }),
        ("sqrk_a015", Variant::Sqrk { q: 0.9, alpha: 0.15 }),
        ("ssqrk_l11", Variant::Ssqrk { q: 0.5, lambda: 11 }),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| solve(&sys, &SolverConfig::new(variant, 100, 3)).unwrap())
        });
    }
    group.finish();
}

fn bench_sigma_min_rows(c: &mut Criterion) {
    let sys = gen_gaussian_system(&GenSpec {
        m: 5_000,
        n: 50,
        beta: 0.0,
        corruption_magnitude: 0.0,
        signed_corruption: false,
        x_star_policy: XStarPolicy::Zero,
        seed: 7,
    })
    .unwrap();
    let mut rng = SeedRng::new(2);
    let subset = sample_without_replacement(5_000, 4_000, &mut rng).unwrap();
    c.bench_function("sigma_min_rows_4000x50", |b| {
        b.iter(|| sigma_min_rows(black_box(&sys.a), black_box(&subset)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_quantile_selection,
    bench_solver_steps,
    bench_sigma_min_rows
);
criterion_main!(benches);
