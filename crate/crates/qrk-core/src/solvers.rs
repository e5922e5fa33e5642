//! The iterative methods: plain randomized Kaczmarz (RK), QuantileRK (QRK),
//! sub-sampled QuantileRK (SQRK), and small-sample QuantileRK (SSQRK), with
//! full per-iteration tracing.
//!
//! All variants share the same projection step; they differ only in how the
//! row to project onto is chosen. QRK thresholds the full residual at its
//! q-quantile, SQRK estimates that quantile from a uniform sample of
//! ceil(alpha*m) rows, and SSQRK picks the row attaining the sample quantile
//! of a constant-size sample of lambda rows.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dot, sample_without_replacement, sigma_max, sigma_min_rows, IndexSet};
use crate::problem::CorruptedSystem;
use crate::quantile::{q_quantile, threshold_set, ThresholdMode};
use crate::rng::SeedRng;

/// Which iteration rule to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Rk,
    Qrk { q: f64 },
    Sqrk { q: f64, alpha: f64 },
    Ssqrk { q: f64, lambda: usize },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Rk => "rk",
            Variant::Qrk { .. } => "qrk",
            Variant::Sqrk { .. } => "sqrk",
            Variant::Ssqrk { .. } => "ssqrk",
        }
    }
}

/// Initial iterate policy. The algorithms' literal start is the zero
/// vector; the gaussian-unit override gives experiments a nonzero initial
/// error when the planted solution is itself zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum X0Policy {
    #[default]
    Zero,
    GaussianUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub max_iters: usize,
    pub seed: u64,
    pub x0_policy: X0Policy,
    pub threshold_mode: ThresholdMode,
    /// Record sigma_min of each accepted-set-minus-corruptions submatrix.
    pub record_sigma_trace: bool,
    /// When set, classify each selection against the q'-quantile of the full
    /// residual (small-sample event bookkeeping).
    pub event_quantile: Option<f64>,
    /// Assert the quantile upper bound gamma_k <= sigma_max * err / sqrt(...)
    /// on every iteration where it applies.
    pub check_quantile_bound: bool,
}

impl SolverConfig {
    pub fn new(variant: Variant, max_iters: usize, seed: u64) -> Self {
        Self {
            variant,
            max_iters,
            seed,
            x0_policy: X0Policy::default(),
            threshold_mode: ThresholdMode::default(),
            record_sigma_trace: false,
            event_quantile: None,
            check_quantile_bound: false,
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match self.variant {
            Variant::Rk => Ok(()),
            Variant::Qrk { q } => check_quantile_index(q, m),
            Variant::Sqrk { q, alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidSpec(format!("alpha must be in (0,1], got {alpha}")));
                }
                check_quantile_index(q, sample_size(alpha, m))
            }
            Variant::Ssqrk { q, lambda } => {
                if lambda < 1 || lambda > m {
                    return Err(Error::InvalidSpec(format!("lambda must be in [1, m], got {lambda}")));
                }
                check_quantile_index(q, lambda)
            }
        }
    }
}

fn check_quantile_index(q: f64, len: usize) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidSpec(format!("q must lie in (0,1), got {q}")));
    }
    // A singleton sample is always well-defined (the quantile is its lone
    // element); see `q_quantile`.
    if len > 1 && (q * len as f64).floor() as usize == 0 {
        return Err(Error::QuantileIndexZero { q, len });
    }
    Ok(())
}

fn sample_size(alpha: f64, m: usize) -> usize {
    ((alpha * m as f64).ceil() as usize).clamp(1, m)
}

/// Event classification for small-sample runs: selected row uncorrupted
/// (E3), corrupted above the full-residual quantile (E1), or corrupted at or
/// below it (E2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    E1,
    E2,
    E3,
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Event::E1 => write!(f, "E1"),
            Event::E2 => write!(f, "E2"),
            Event::E3 => write!(f, "E3"),
        }
    }
}

/// Classify a selection against gamma = q'-quantile of the full residual
/// magnitudes. Ties (residual exactly gamma) go to E2.
pub fn classify_event(
    selected_row: usize,
    full_residual_magnitudes: &[f64],
    q_prime: f64,
    corrupt_support: &IndexSet,
) -> Result<Event> {
    if !corrupt_support.contains(selected_row) {
        return Ok(Event::E3);
    }
    let gamma = q_quantile(full_residual_magnitudes, q_prime)?;
    if full_residual_magnitudes[selected_row] > gamma {
        Ok(Event::E1)
    } else {
        Ok(Event::E2)
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based iteration number.
    pub iter: usize,
    /// Seconds since solve start, captured right after the projection.
    pub time_s: f64,
    /// ||x_k - x*||^2 after this iteration's projection.
    pub sq_error: f64,
    pub gamma: Option<f64>,
    /// |B_k| for quantile-thresholding variants.
    pub accepted: Option<usize>,
    /// |S_k| = |B_k intersect C|.
    pub accepted_corrupt: Option<usize>,
    pub selected_row: usize,
    pub selected_corrupt: bool,
    /// sigma_min of the B_k \ C submatrix, when recorded.
    pub sigma_min_bk: Option<f64>,
    pub event: Option<Event>,
    /// Resample attempts consumed by an empty strict-mode accepted set.
    pub retries: u32,
}

/// Full per-iteration history of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub initial_sq_error: f64,
    pub rows: Vec<TraceRow>,
}

impl IterateTrace {
    /// Running minimum of the recorded per-iteration sigma values.
    pub fn min_sigma(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.sigma_min_bk)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    pub fn final_sq_error(&self) -> f64 {
        self.rows.last().map_or(self.initial_sq_error, |r| r.sq_error)
    }

    /// Squared error before iteration `k` (1-based): the previous row's
    /// post-step error, or the initial error for k = 1.
    pub fn sq_error_before(&self, k: usize) -> f64 {
        if k <= 1 {
            self.initial_sq_error
        } else {
            self.rows[k - 2].sq_error
        }
    }
}

/// Outcome of a single step, before trace bookkeeping.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub selected_row: usize,
    pub gamma: Option<f64>,
    /// The accepted set B_k (quantile-thresholding variants only).
    pub accepted: Option<IndexSet>,
    pub retries: u32,
}

/// Orthogonal projection of `x` onto the hyperplane <a_i, y> = b_hat_i.
/// Rows need not be unit-norm; the step is scaled by 1/||a_i||^2,
/// which reduces to the plain update for unit rows.
pub fn project(x: &[f64], a_i: &[f64], b_hat_i: f64) -> Vec<f64> {
    let norm_sq = dot(a_i, a_i);
    let step = (b_hat_i - dot(a_i, x)) / norm_sq;
    x.iter().zip(a_i).map(|(xi, ai)| xi + step * ai).collect()
}

// Unit-row fast path used by the solver loops.
fn project_in_place(x: &mut [f64], a_i: &[f64], b_hat_i: f64) {
    let step = b_hat_i - dot(a_i, x);
    for (xi, ai) in x.iter_mut().zip(a_i) {
        *xi += step * ai;
    }
}

/// Plain RK: project onto a uniformly random equation.
pub fn rk_step(system: &CorruptedSystem, x: &mut [f64], rng: &mut SeedRng) -> StepOutcome {
    let i = rng.gen_index(system.m());
    project_in_place(x, system.a.row(i), system.b_hat[i]);
    StepOutcome {
        selected_row: i,
        gamma: None,
        accepted: None,
        retries: 0,
    }
}

const STRICT_MODE_RETRIES: u32 = 100;

/// One SQRK iteration: sample tau_k of ceil(alpha*m) rows, threshold the
/// sampled residual magnitudes at their q-quantile, project onto a uniform
/// member of the accepted set. `alpha = 1` covers QRK (full residual; the
/// sample is then the full row set and no sampling randomness is consumed).
pub fn sqrk_step(
    system: &CorruptedSystem,
    x: &mut [f64],
    q: f64,
    alpha: f64,
    mode: ThresholdMode,
    rng: &mut SeedRng,
) -> Result<StepOutcome> {
    let m = system.m();
    let k_sample = sample_size(alpha, m);
    let mut retries = 0;
    loop {
        let tau = if k_sample == m {
            IndexSet::full(m)
        } else {
            sample_without_replacement(m, k_sample, rng)?
        };
        let mags: Vec<f64> = tau
            .iter()
            .map(|i| (dot(system.a.row(i), x) - system.b_hat[i]).abs())
            .collect();
        let gamma = q_quantile(&mags, q)?;
        match threshold_set(&tau, &mags, gamma, mode) {
            Ok(accepted) => {
                let i = accepted.as_slice()[rng.gen_index(accepted.len())];
                project_in_place(x, system.a.row(i), system.b_hat[i]);
                return Ok(StepOutcome {
                    selected_row: i,
                    gamma: Some(gamma),
                    accepted: Some(accepted),
                    retries,
                });
            }
            Err(Error::EmptyAcceptedSet) => {
                retries += 1;
                if retries > STRICT_MODE_RETRIES || k_sample == m {
                    // Resampling cannot help when tau is already the full set.
                    return Err(Error::EmptyAcceptedSet);
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// One SSQRK iteration: sample lambda rows and project onto the row whose
/// residual magnitude attains the sample q-quantile, ties broken uniformly.
pub fn ssqrk_step(
    system: &CorruptedSystem,
    x: &mut [f64],
    q: f64,
    lambda: usize,
    rng: &mut SeedRng,
) -> Result<StepOutcome> {
    let m = system.m();
    let tau = if lambda == m {
        IndexSet::full(m)
    } else {
        sample_without_replacement(m, lambda, rng)?
    };
    let mags: Vec<f64> = tau
        .iter()
        .map(|i| (dot(system.a.row(i), x) - system.b_hat[i]).abs())
        .collect();
    let gamma = q_quantile(&mags, q)?;
    // gamma is an element of mags, so at least one index attains it.
    let attaining: Vec<usize> = tau
        .iter()
        .zip(&mags)
        .filter(|(_, &mag)| mag == gamma)
        .map(|(i, _)| i)
        .collect();
    let i = attaining[rng.gen_index(attaining.len())];
    project_in_place(x, system.a.row(i), system.b_hat[i]);
    Ok(StepOutcome {
        selected_row: i,
        gamma: Some(gamma),
        accepted: None,
        retries: 0,
    })
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Run `config.max_iters` iterations of the configured variant.
///
/// Wall-clock stamps are captured immediately after each projection;
/// sigma-trace and event bookkeeping run after the stamp so they do not
/// distort error-versus-time curves within an iteration. Identical
/// (system, config) pairs produce identical traces apart from `time_s`.
pub fn solve(system: &CorruptedSystem, config: &SolverConfig) -> Result<(Vec<f64>, IterateTrace)> {
    config.validate(system.m())?;
    let base_rng = SeedRng::new(config.seed);
    let mut iter_rng = base_rng.split(0);

    let mut x = match config.x0_policy {
        X0Policy::Zero => vec![0.0; system.n()],
        X0Policy::GaussianUnit => {
            let mut x0_rng = base_rng.split(1);
            let mut v: Vec<f64> = (0..system.n()).map(|_| x0_rng.gen_gaussian()).collect();
            let nrm = crate::linalg::norm(&v).max(f64::MIN_POSITIVE);
            v.iter_mut().for_each(|vi| *vi /= nrm);
            v
        }
    };

    let quantile_bound_factor = if config.check_quantile_bound {
        quantile_bound_prefactor(system, &config.variant)?
    } else {
        None
    };

    let initial_sq_error = sq_dist(&x, &system.x_star);
    let mut rows = Vec::with_capacity(config.max_iters);
    let start = Instant::now();

    for k in 1..=config.max_iters {
        // Full residual magnitudes at the pre-step iterate, only when event
        // classification is requested (costs a full O(mn) scan).
        let pre_step_mags: Option<Vec<f64>> = config.event_quantile.map(|_| {
            (0..system.m())
                .map(|i| (dot(system.a.row(i), &x) - system.b_hat[i]).abs())
                .collect()
        });
        let pre_step_sq_error = sq_dist(&x, &system.x_star);

        let outcome = match config.variant {
            Variant::Rk => rk_step(system, &mut x, &mut iter_rng),
            Variant::Qrk { q } => {
                sqrk_step(system, &mut x, q, 1.0, config.threshold_mode, &mut iter_rng)?
            }
            Variant::Sqrk { q, alpha } => {
                sqrk_step(system, &mut x, q, alpha, config.threshold_mode, &mut iter_rng)?
            }
            Variant::Ssqrk { q, lambda } => {
                ssqrk_step(system, &mut x, q, lambda, &mut iter_rng)?
            }
        };
        let time_s = start.elapsed().as_secs_f64();

        let sq_error = sq_dist(&x, &system.x_star);
        let accepted = outcome.accepted.as_ref().map(|b| b.len());
        let accepted_corrupt = outcome.accepted.as_ref().map(|b| {
            system.corrupt_support.iter().filter(|&i| b.contains(i)).count()
        });
        let sigma_min_bk = if config.record_sigma_trace {
            match &outcome.accepted {
                Some(b) => {
                    let good = b.difference(&system.corrupt_support);
                    if good.is_empty() {
                        Some(0.0)
                    } else {
                        Some(sigma_min_rows(&system.a, &good)?)
                    }
                }
                None => None,
            }
        } else {
            None
        };
        let event = match (config.event_quantile, &pre_step_mags) {
            (Some(q_prime), Some(mags)) => Some(classify_event(
                outcome.selected_row,
                mags,
                q_prime,
                &system.corrupt_support,
            )?),
            _ => None,
        };

        if let (Some(factor), Some(gamma)) = (quantile_bound_factor, outcome.gamma) {
            let bound = factor * pre_step_sq_error.sqrt();
            assert!(
                gamma <= bound + 1e-9,
                "quantile bound violated at iteration {k}: gamma {gamma} > {bound}"
            );
        }

        rows.push(TraceRow {
            iter: k,
            time_s,
            sq_error,
            gamma: outcome.gamma,
            accepted,
            accepted_corrupt,
            selected_row: outcome.selected_row,
            selected_corrupt: system.is_corrupted(outcome.selected_row),
            sigma_min_bk,
            event,
            retries: outcome.retries,
        });
    }

    Ok((x, IterateTrace { initial_sq_error, rows }))
}

// sigma_max(A) / sqrt(m [alpha(1-q) - beta]), the prefactor of the quantile
// upper bound; None when the variant has no quantile or the condition
// alpha(1-q) > beta fails.
fn quantile_bound_prefactor(system: &CorruptedSystem, variant: &Variant) -> Result<Option<f64>> {
    let (q, alpha) = match *variant {
        Variant::Qrk { q } => (q, 1.0),
        Variant::Sqrk { q, alpha } => (q, alpha),
        _ => return Ok(None),
    };
    let d = alpha * (1.0 - q) - system.beta;
    if d <= 0.0 {
        return Ok(None);
    }
    let smax = sigma_max(system.a.inner(), crate::linalg::SIGMA_MAX_DEFAULT_TOL)?;
    Ok(Some(smax / (system.m() as f64 * d).sqrt()))
}

/// CSV header for per-iteration trace exports.
pub const TRACE_CSV_HEADER: &str =
    "trial,iter,time_s,sq_error,gamma,accepted,accepted_corrupt,selected_row,selected_corrupt,event";

/// Append one trial's rows in the documented trace schema. Optional columns
/// are left empty where the variant does not produce them.
pub fn write_trace_csv<W: Write>(w: &mut W, trial: usize, trace: &IterateTrace) -> Result<()> {
    for r in &trace.rows {
        writeln!(
            w,
            "{},{},{:.9},{:.17e},{},{},{},{},{},{}",
            trial,
            r.iter,
            r.time_s,
            r.sq_error,
            r.gamma.map_or(String::new(), |g| format!("{g:.17e}")),
            r.accepted.map_or(String::new(), |v| v.to_string()),
            r.accepted_corrupt.map_or(String::new(), |v| v.to_string()),
            r.selected_row,
            r.selected_corrupt,
            r.event.map_or(String::new(), |e| e.to_string()),
        )?;
    }
    Ok(())
}
