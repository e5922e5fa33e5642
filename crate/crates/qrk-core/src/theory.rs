//! Convergence-rate constants and hypothesis conditions.
//!
//! The composite per-iteration contraction factor mixes an uncorrupted
//! branch r_G = 1 - sigma_min^2/(alpha q m) with a corrupted-branch worst
//! case r_C_tilde, weighted by beta/(alpha q). Convergence requires
//! alpha q > beta (enough uncorrupted rows in any sample), alpha(1-q) > beta
//! (the quantile bound applies), and the rate condition, which is checked in
//! two algebraically equivalent forms as a transcription guard.
//!
//! The governing constant sigma_{alpha,q,beta,min} is the minimum smallest
//! singular value over row subsets of relative size at least alpha q - beta.
//! Computing it exactly is combinatorial; both estimators here (random
//! subsets, and submatrices observed along solver traces) are upper-biased.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sample_without_replacement, sigma_min_rows, RowNormalizedMatrix};
use crate::rng::SeedRng;
use crate::solvers::IterateTrace;

/// Inputs to the rate formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub m: usize,
    pub alpha: f64,
    pub q: f64,
    pub beta: f64,
    pub sigma_max: f64,
    /// Estimate of sigma_{alpha,q,beta,min}(A).
    pub sigma_aqb_min: f64,
}

impl RateParams {
    fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0)
            || !(self.alpha > 0.0 && self.alpha <= 1.0)
            || !(0.0..1.0).contains(&self.beta)
            || self.sigma_max < 0.0
            || self.sigma_aqb_min < 0.0
            || self.m == 0
        {
            return Err(Error::InvalidSpec(format!("invalid rate parameters: {self:?}")));
        }
        Ok(())
    }

    /// floor(beta * m), the number of corrupted equations.
    pub fn corruption_count(&self) -> usize {
        (self.beta * self.m as f64).floor() as usize
    }
}

/// Evaluated rates and hypothesis booleans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub r_g: f64,
    pub r_c_tilde: f64,
    pub r: f64,
    /// alpha * q > beta.
    pub cond_sampling: bool,
    /// alpha * (1 - q) > beta.
    pub cond_quantile: bool,
    /// The rate condition in its r_G < (1 - w r_C_tilde)/(1 - w) form.
    pub cond_rate: bool,
    /// The same condition in its rearranged (remark) form.
    pub cond_rate_equiv: bool,
    pub is_convergent: bool,
}

/// r_G = 1 - sigma_{alpha,q,beta,min}^2 / (alpha q m).
pub fn rate_rg(p: &RateParams) -> Result<f64> {
    p.validate()?;
    Ok(1.0 - p.sigma_aqb_min.powi(2) / (p.alpha * p.q * p.m as f64))
}

/// Worst-case corrupted-branch factor
/// 1 + (2/sqrt(beta m)) sigma_max^2/sqrt(m d) + sigma_max^2/(m d)
/// with d = alpha(1-q) - beta. Returns 1 when floor(beta m) = 0 (the
/// corrupted branch is then vacuous).
pub fn rate_rc_tilde(p: &RateParams) -> Result<f64> {
    p.validate()?;
    if p.corruption_count() == 0 {
        return Ok(1.0);
    }
    let d = p.alpha * (1.0 - p.q) - p.beta;
    if d <= 0.0 {
        return Err(Error::QuantileConditionViolated);
    }
    let m = p.m as f64;
    let s2 = p.sigma_max.powi(2);
    Ok(1.0 + 2.0 / (p.beta * m).sqrt() * s2 / (m * d).sqrt() + s2 / (m * d))
}

/// Corrupted-branch factor at a given |S_k|; coincides with
/// [`rate_rc_tilde`] when |S_k| = beta m.
pub fn rate_rc(p: &RateParams, s_k_size: usize) -> Result<f64> {
    p.validate()?;
    if s_k_size == 0 {
        return Err(Error::EmptySample);
    }
    let d = p.alpha * (1.0 - p.q) - p.beta;
    if d <= 0.0 {
        return Err(Error::QuantileConditionViolated);
    }
    let m = p.m as f64;
    let s2 = p.sigma_max.powi(2);
    Ok(1.0 + 2.0 / (s_k_size as f64).sqrt() * s2 / (m * d).sqrt() + s2 / (m * d))
}

/// Composite rate r = (1 - beta/(alpha q)) r_G + (beta/(alpha q)) r_C_tilde
/// plus all hypothesis booleans. When floor(beta m) = 0 the corruption
/// conditions hold vacuously and r = r_G.
pub fn rate_r(p: &RateParams) -> Result<RateReport> {
    p.validate()?;
    let r_g = rate_rg(p)?;

    if p.corruption_count() == 0 {
        return Ok(RateReport {
            r_g,
            r_c_tilde: 1.0,
            r: r_g,
            cond_sampling: true,
            cond_quantile: true,
            cond_rate: r_g < 1.0,
            cond_rate_equiv: r_g < 1.0,
            is_convergent: r_g < 1.0,
        });
    }

    let cond_sampling = p.alpha * p.q > p.beta;
    let cond_quantile = p.alpha * (1.0 - p.q) > p.beta;
    if !cond_quantile || !cond_sampling {
        return Ok(RateReport {
            r_g,
            r_c_tilde: f64::INFINITY,
            r: f64::INFINITY,
            cond_sampling,
            cond_quantile,
            cond_rate: false,
            cond_rate_equiv: false,
            is_convergent: false,
        });
    }

    let r_c_tilde = rate_rc_tilde(p)?;
    let w = p.beta / (p.alpha * p.q);
    let r = (1.0 - w) * r_g + w * r_c_tilde;

    // Form (1): r_G < (1 - w r_C_tilde) / (1 - w).
    let cond_rate = r_g < (1.0 - w * r_c_tilde) / (1.0 - w);

    // Rearranged form: w + beta (sigma_max/sigma_min)^2 (2/(sqrt(beta) sqrt(d)) + 1/d) < 1.
    let d = p.alpha * (1.0 - p.q) - p.beta;
    let cond_rate_equiv = if p.sigma_aqb_min > 0.0 {
        let ratio = p.sigma_max.powi(2) / p.sigma_aqb_min.powi(2);
        w + p.beta * ratio * (2.0 / (p.beta.sqrt() * d.sqrt()) + 1.0 / d) < 1.0
    } else {
        false
    };

    let is_convergent = cond_sampling && cond_quantile && cond_rate && r < 1.0;
    Ok(RateReport {
        r_g,
        r_c_tilde,
        r,
        cond_sampling,
        cond_quantile,
        cond_rate,
        cond_rate_equiv,
        is_convergent,
    })
}

/// Estimate sigma_{alpha,q,beta,min}(A) as the minimum of sigma_min over
/// `num_samples` uniform random row subsets of size ceil((alpha q - beta) m).
/// Subsets use independently split rng streams, so the result is
/// deterministic and independent of evaluation order.
pub fn estimate_sigma_aqb_min(
    a: &RowNormalizedMatrix,
    alpha: f64,
    q: f64,
    beta: f64,
    num_samples: usize,
    rng: &SeedRng,
) -> Result<f64> {
    let m = a.rows();
    let frac = alpha * q - beta;
    if frac <= 0.0 {
        return Err(Error::SamplingConditionViolated);
    }
    if num_samples == 0 {
        return Err(Error::EmptySample);
    }
    let size = ((frac * m as f64).ceil() as usize).clamp(1, m);
    let minima: Result<Vec<f64>> = (0..num_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut sub_rng = rng.split(i);
            let s = sample_without_replacement(m, size, &mut sub_rng)?;
            sigma_min_rows(a, &s)
        })
        .collect();
    Ok(minima?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Minimum recorded sigma over all iterations and trials.
pub fn estimate_sigma_from_trace(traces: &[IterateTrace]) -> Result<f64> {
    traces
        .iter()
        .filter_map(|t| t.min_sigma())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or(Error::EmptyTrace)
}

/// One heatmap cell: hypothesis booleans for a (q, alpha) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub q: f64,
    pub alpha: f64,
    pub cond_sampling: bool,
    pub cond_quantile: bool,
    pub cond_rate: bool,
    pub satisfied: bool,
}

/// Evaluate the Theorem-1 hypotheses on a (q, alpha) grid. Infeasible cells
/// (alpha q <= beta, so the sigma estimator has nothing to sample) are
/// reported false rather than failing. Cell (i, j) gets the rng stream
/// keyed by its grid coordinates, so results do not depend on scheduling.
pub fn hypothesis_heatmap(
    a: &RowNormalizedMatrix,
    beta: f64,
    q_grid: &[f64],
    alpha_grid: &[f64],
    num_samples: usize,
    sigma_max: f64,
    rng: &SeedRng,
) -> Result<Vec<HeatmapCell>> {
    if q_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidSpec("empty heatmap grid".into()));
    }
    let m = a.rows();
    let cells: Vec<(usize, usize)> = (0..q_grid.len())
        .flat_map(|i| (0..alpha_grid.len()).map(move |j| (i, j)))
        .collect();
    cells
        .into_par_iter()
        .map(|(i, j)| {
            let q = q_grid[i];
            let alpha = alpha_grid[j];
            let cond_sampling = alpha * q > beta;
            let cond_quantile = alpha * (1.0 - q) > beta;
            if !cond_sampling || !cond_quantile {
                return Ok(HeatmapCell {
                    q,
                    alpha,
                    cond_sampling,
                    cond_quantile,
                    cond_rate: false,
                    satisfied: false,
                });
            }
            let cell_rng = rng.split2(i as u64, j as u64);
            let sigma = estimate_sigma_aqb_min(a, alpha, q, beta, num_samples, &cell_rng)?;
            let report = rate_r(&RateParams {
                m,
                alpha,
                q,
                beta,
                sigma_max,
                sigma_aqb_min: sigma,
            })?;
            Ok(HeatmapCell {
                q,
                alpha,
                cond_sampling: report.cond_sampling,
                cond_quantile: report.cond_quantile,
                cond_rate: report.cond_rate,
                satisfied: report.cond_sampling && report.cond_quantile && report.cond_rate,
            })
        })
        .collect()
}

pub const HEATMAP_CSV_HEADER: &str = "q,alpha,cond_sampling,cond_quantile,cond_rate,satisfied";

pub fn write_heatmap_csv<W: Write>(w: &mut W, cells: &[HeatmapCell]) -> Result<()> {
    writeln!(w, "{HEATMAP_CSV_HEADER}")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            c.q, c.alpha, c.cond_sampling, c.cond_quantile, c.cond_rate, c.satisfied
        )?;
    }
    Ok(())
}
