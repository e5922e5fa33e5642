//! Acceptance gate: one test per top-level criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line; a FAIL also fails the corresponding test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use qrk_cli::experiment::{
    bound_curve, mean_curve, run_experiment, run_trials, ExperimentSpec, PlotFormat, RunConfig,
    SigmaSource,
};
use qrk_core::linalg::{dot, norm, sigma_max, SIGMA_MAX_DEFAULT_TOL};
use qrk_core::oracle::singular_values;
use qrk_core::problem::{gen_gaussian_system, CorruptedSystem, GenSpec, XStarPolicy};
use qrk_core::quantile::{q_quantile, ThresholdMode};
use qrk_core::solvers::{project, sqrk_step, IterateTrace, Variant};
use qrk_core::theory::{estimate_sigma_from_trace, hypothesis_heatmap, rate_r, RateParams};
use qrk_core::SeedRng;

fn criterion(num: usize, name: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    match &result {
        Ok(()) => println!("ACCEPTANCE {num:2} ({name}): PASS"),
        Err(_) => println!("ACCEPTANCE {num:2} ({name}): FAIL"),
    }
    if let Err(e) = result {
        std::panic::resume_unwind(e);
    }
}

// ---------------------------------------------------------------- fixture

const FIX_Q: f64 = 0.9;
const FIX_ALPHAS: [f64; 3] = [1.0, 0.5, 0.15];
const FIX_TRIALS: usize = 10;
const FIX_ITERS: usize = 1500;
const FIX_RUN_SEED: u64 = 7;

/// Shared desk-scale experiment: m = 5000, n = 50, beta = 1e-3
/// (5 corruptions of magnitude 10), q = 0.9, alpha in {1, 0.5, 0.15},
/// 10 trials x 1500 iterations. The alpha = 1 run records the per-iteration
/// sigma trace for the rate-bound criterion.
struct Fixture {
    system: CorruptedSystem,
    sigma_max: f64,
    /// (alpha, traces) in FIX_ALPHAS order.
    runs: Vec<(f64, Vec<IterateTrace>)>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let system = gen_gaussian_system(&GenSpec {
            m: 5000,
            n: 50,
            beta: 1e-3,
            corruption_magnitude: 10.0,
            signed_corruption: false,
            x_star_policy: XStarPolicy::GaussianUnit,
            seed: 26,
        })
        .unwrap();
        assert_eq!(system.corruption_count(), 5);
        let s_max = sigma_max(system.a.inner(), SIGMA_MAX_DEFAULT_TOL).unwrap();
        let runs = FIX_ALPHAS
            .iter()
            .map(|&alpha| {
                let mut cfg = RunConfig::new(
                    format!("fixture_a{alpha}"),
                    Variant::Sqrk { q: FIX_Q, alpha },
                );
                cfg.record_sigma_trace = alpha == 1.0;
                let traces =
                    run_trials(&system, &cfg, FIX_TRIALS, FIX_ITERS, FIX_RUN_SEED).unwrap();
                (alpha, traces)
            })
            .collect();
        Fixture { system, sigma_max: s_max, runs }
    })
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_quantile_oracle_equivalence() {
    criterion(1, "quantile oracle equivalence", || {
        let mut rng = SeedRng::new(101);
        for case in 0..5000 {
            let len = 1 + rng.gen_index(500);
            // Alternate continuous and duplicate-heavy integer draws.
            let vals: Vec<f64> = (0..len)
                .map(|_| {
                    if case % 2 == 0 {
                        rng.gen_unit() * 10.0 - 5.0
                    } else {
                        rng.gen_index(8) as f64
                    }
                })
                .collect();
            let q = if len == 1 {
                0.5
            } else {
                // Resample until floor(q * len) >= 1.
                loop {
                    let q = rng.gen_unit();
                    if q > 0.0 && q < 1.0 && (q * len as f64).floor() >= 1.0 {
                        break q;
                    }
                }
            };
            let got = q_quantile(&vals, q).unwrap();
            let mut sorted = vals.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let k = ((q * len as f64).floor() as usize).max(1);
            assert_eq!(got, sorted[k - 1], "len={len} q={q}");
        }
    });
}

#[test]
fn criterion_02_projection_correctness() {
    criterion(2, "projection correctness", || {
        let mut rng = SeedRng::new(202);
        let n = 20;
        for _ in 0..1000 {
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_gaussian()).collect();
            let s = norm(&a);
            a.iter_mut().for_each(|v| *v /= s);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_gaussian()).collect();

            // Arbitrary right-hand side: the projected point satisfies it.
            let b_hat = rng.gen_gaussian() * 3.0;
            let x1 = project(&x, &a, b_hat);
            assert!((dot(&a, &x1) - b_hat).abs() < 1e-12);

            // Consistent (uncorrupted) row: Pythagorean identity.
            let x_star: Vec<f64> = (0..n).map(|_| rng.gen_gaussian()).collect();
            let x2 = project(&x, &a, dot(&a, &x_star));
            let d0: f64 = x.iter().zip(&x_star).map(|(u, v)| (u - v) * (u - v)).sum();
            let d1: f64 = x2.iter().zip(&x_star).map(|(u, v)| (u - v) * (u - v)).sum();
            let proj: f64 = dot(&a, &x.iter().zip(&x_star).map(|(u, v)| u - v).collect::<Vec<_>>());
            assert!((d1 - (d0 - proj * proj)).abs() < 1e-10);
        }
    });
}

#[test]
fn criterion_03_rk_baseline_rate() {
    criterion(3, "RK baseline rate", || {
        let system = gen_gaussian_system(&GenSpec {
            m: 2000,
            n: 50,
            beta: 0.0,
            corruption_magnitude: 0.0,
            signed_corruption: false,
            x_star_policy: XStarPolicy::GaussianUnit,
            seed: 3,
        })
        .unwrap();
        let svs = singular_values(system.a.inner());
        let s_min = *svs.last().unwrap();
        let rate = 1.0 - s_min * s_min / system.m() as f64;
        assert!(rate > 0.0 && rate < 1.0);

        let cfg = RunConfig::new("rk", Variant::Rk);
        let traces = run_trials(&system, &cfg, 20, 2000, 33).unwrap();
        let mean = mean_curve(&traces, 2000);
        let initial = mean[0];
        for (k, &v) in mean.iter().enumerate() {
            let bound = 2.0 * rate.powi(k as i32) * initial;
            assert!(v <= bound, "k={k}: mean {v:.3e} > bound {bound:.3e}");
        }
    });
}

#[test]
fn criterion_04_sqrk_corruption_robustness() {
    criterion(4, "sQRK corruption robustness", || {
        let fix = fixture();
        let mut finals = Vec::new();
        for (alpha, traces) in &fix.runs {
            let mean = mean_curve(traces, FIX_ITERS);
            assert!(
                mean[FIX_ITERS] < 1e-6 * mean[0],
                "alpha={alpha}: final {:.3e} vs initial {:.3e}",
                mean[FIX_ITERS],
                mean[0]
            );
            finals.push(mean[FIX_ITERS]);
        }
        let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi <= 3.0 * lo, "final means spread beyond 3x: {finals:?}");
    });
}

#[test]
fn criterion_05_theorem_bound_dominance() {
    criterion(5, "theorem bound dominance (trace sigma)", || {
        let fix = fixture();
        let (alpha, traces) = &fix.runs[0];
        assert_eq!(*alpha, 1.0);
        let sigma = estimate_sigma_from_trace(traces).unwrap();
        let params = RateParams {
            m: fix.system.m(),
            alpha: 1.0,
            q: FIX_Q,
            beta: fix.system.beta,
            sigma_max: fix.sigma_max,
            sigma_aqb_min: sigma,
        };
        let report = rate_r(&params).unwrap();
        let mean = mean_curve(traces, FIX_ITERS);
        if report.is_convergent {
            assert!(report.r < 1.0);
            let mut bound = mean[0];
            for (k, &v) in mean.iter().enumerate() {
                assert!(v <= 2.0 * bound, "k={k}: mean {v:.3e} > 2 r^k initial {bound:.3e}");
                bound *= report.r;
            }
        } else {
            // Desk-scale hypothesis failure: the report must say so and no
            // bound curve may be produced.
            assert!(!report.is_convergent);
            assert!(bound_curve(&report, mean[0], FIX_ITERS).is_none());
        }
    });
}

#[test]
fn criterion_06_remark_equivalence() {
    criterion(6, "remark equivalence of rate conditions", || {
        let mut rng = SeedRng::new(606);
        let mut checked = 0;
        while checked < 10_000 {
            let m = 100 + rng.gen_index(100_000);
            let alpha = 0.05 + 0.95 * rng.gen_unit();
            let q = 0.05 + 0.9 * rng.gen_unit();
            let beta = rng.gen_unit() * 0.2;
            if (beta * m as f64).floor() < 1.0
                || alpha * q <= beta
                || alpha * (1.0 - q) <= beta
            {
                continue;
            }
            let s_max = (0.1 + rng.gen_unit()) * (m as f64).sqrt();
            let s_min = s_max * (0.01 + 0.99 * rng.gen_unit());
            let report = rate_r(&RateParams {
                m,
                alpha,
                q,
                beta,
                sigma_max: s_max,
                sigma_aqb_min: s_min,
            })
            .unwrap();
            assert_eq!(
                report.cond_rate, report.cond_rate_equiv,
                "m={m} alpha={alpha} q={q} beta={beta} s_max={s_max} s_min={s_min}"
            );
            checked += 1;
        }
    });
}

#[test]
fn criterion_07_heatmap_monotonicity() {
    criterion(7, "heatmap monotonicity in beta", || {
        let fix = fixture();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 11.0).collect();
        let rng = SeedRng::new(707);
        // The reference corruption rates scaled to the desk m (10x smaller
        // system, 10x larger beta keeps the corruption counts comparable).
        let betas = [1e-4, 1e-3, 1e-2, 1e-1];
        let mut counts = Vec::new();
        for (bi, &beta) in betas.iter().enumerate() {
            let cells = hypothesis_heatmap(
                &fix.system.a,
                beta,
                &grid,
                &grid,
                3,
                fix.sigma_max,
                &rng.split(bi as u64),
            )
            .unwrap();
            for c in &cells {
                if c.q * c.alpha <= beta || c.alpha * (1.0 - c.q) <= beta {
                    assert!(!c.satisfied, "infeasible cell marked satisfied: {c:?}");
                }
            }
            counts.push(cells.iter().filter(|c| c.satisfied).count());
        }
        for w in counts.windows(2) {
            assert!(w[1] <= w[0], "satisfied counts not non-increasing: {counts:?}");
        }
        assert!(counts[0] > 0, "smallest beta produced an empty region");
    });
}

#[test]
fn criterion_08_cardinality_laws() {
    criterion(8, "cardinality laws", || {
        let fix = fixture();
        let m = fix.system.m();
        let beta_floor = (fix.system.beta * m as f64).floor() as usize;
        for (alpha, traces) in &fix.runs {
            let sample = (alpha * m as f64).ceil() as usize;
            let min_accepted = (FIX_Q * sample as f64).floor() as usize;
            for trace in traces {
                for row in &trace.rows {
                    let b_k = row.accepted.unwrap();
                    let s_k = row.accepted_corrupt.unwrap();
                    assert!(b_k >= min_accepted, "alpha={alpha}: |B_k|={b_k} < {min_accepted}");
                    assert!(s_k <= beta_floor, "alpha={alpha}: |S_k|={s_k} > {beta_floor}");
                }
            }
        }
        // Membership of the selected row in B_k, at step granularity.
        for &alpha in &FIX_ALPHAS {
            let mut x = vec![0.0; fix.system.n()];
            let mut rng = SeedRng::new(808).split((alpha * 100.0) as u64);
            for _ in 0..300 {
                let out = sqrk_step(
                    &fix.system,
                    &mut x,
                    FIX_Q,
                    alpha,
                    ThresholdMode::Inclusive,
                    &mut rng,
                )
                .unwrap();
                assert!(out.accepted.unwrap().contains(out.selected_row));
            }
        }
    });
}

#[test]
fn criterion_09_lemma1_runtime_bound() {
    criterion(9, "quantile runtime bound", || {
        let fix = fixture();
        let m = fix.system.m() as f64;
        for (alpha, traces) in &fix.runs {
            let d = alpha * (1.0 - FIX_Q) - fix.system.beta;
            assert!(d > 0.0);
            let factor = fix.sigma_max / (m * d).sqrt();
            for trace in traces {
                for (k, row) in trace.rows.iter().enumerate() {
                    let gamma = row.gamma.unwrap();
                    let err = trace.sq_error_before(k + 1).sqrt();
                    assert!(
                        gamma <= factor * err + 1e-9,
                        "alpha={alpha} k={k}: gamma {gamma:.3e} > {:.3e}",
                        factor * err
                    );
                }
            }
        }
    });
}

#[test]
fn criterion_10_small_sample_behavior() {
    criterion(10, "small-sample behavior", || {
        let system = gen_gaussian_system(&GenSpec {
            m: 10_000,
            n: 100,
            beta: 0.02,
            corruption_magnitude: 10.0,
            signed_corruption: false,
            x_star_policy: XStarPolicy::GaussianUnit,
            seed: 10,
        })
        .unwrap();

        // lambda = 11, median quantile: converges.
        let cfg = RunConfig::new("ss11", Variant::Ssqrk { q: 0.5, lambda: 11 });
        let traces = run_trials(&system, &cfg, 10, 20_000, 1010).unwrap();
        let mean = mean_curve(&traces, 20_000);
        let target = 1e-4 * mean[0];
        assert!(
            mean.iter().any(|&v| v < target),
            "lambda=11 median never reached {target:.3e} (final {:.3e})",
            mean[20_000]
        );

        // lambda = 3, second-largest residual: spiking behaviour. A spike is
        // an error exceeding 10x the median of the previous 100 errors.
        let cfg = RunConfig::new("ss3", Variant::Ssqrk { q: 2.0 / 3.0, lambda: 3 });
        let traces = run_trials(&system, &cfg, 10, 20_000, 1010).unwrap();
        let spike = traces.iter().any(|t| {
            (100..t.rows.len()).any(|k| {
                let mut window: Vec<f64> =
                    t.rows[k - 100..k].iter().map(|r| r.sq_error).collect();
                window.sort_by(|a, b| a.total_cmp(b));
                t.rows[k].sq_error > 10.0 * window[50]
            })
        });
        assert!(spike, "lambda=3 second-largest mode never spiked");
    });
}

#[test]
fn criterion_11_determinism() {
    criterion(11, "determinism modulo time_s", || {
        let system = gen_gaussian_system(&GenSpec {
            m: 500,
            n: 16,
            beta: 0.01,
            corruption_magnitude: 10.0,
            signed_corruption: false,
            x_star_policy: XStarPolicy::GaussianUnit,
            seed: 11,
        })
        .unwrap();
        let configs = vec![
            RunConfig::new("rk", Variant::Rk),
            RunConfig::new("sqrk", Variant::Sqrk { q: 0.8, alpha: 0.5 }),
            RunConfig::new("ssqrk", Variant::Ssqrk { q: 0.5, lambda: 11 }),
        ];
        let run = |dir: &std::path::Path| {
            let spec = ExperimentSpec {
                trials: 3,
                max_iters: 200,
                seed: 1111,
                bound_overlay: true,
                sigma_source: SigmaSource::Sampled { num_samples: 10 },
                output_dir: dir.to_path_buf(),
                plot_format: PlotFormat::Svg,
            };
            run_experiment(&system, &spec, &configs, "det").unwrap();
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(d1.path());
        run(d2.path());
        for label in ["rk", "sqrk", "ssqrk"] {
            let strip = |p: std::path::PathBuf| {
                std::fs::read_to_string(p)
                    .unwrap()
                    .lines()
                    .map(|l| {
                        let mut f: Vec<&str> = l.split(',').collect();
                        if f.len() > 2 {
                            f[2] = "";
                        }
                        f.join(",")
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(
                strip(d1.path().join(format!("trace_{label}.csv"))),
                strip(d2.path().join(format!("trace_{label}.csv"))),
                "trace_{label}.csv differs beyond time_s"
            );
            assert_eq!(
                std::fs::read(d1.path().join(format!("mean_{label}.csv"))).unwrap(),
                std::fs::read(d2.path().join(format!("mean_{label}.csv"))).unwrap(),
                "mean_{label}.csv differs"
            );
        }
    });
}
