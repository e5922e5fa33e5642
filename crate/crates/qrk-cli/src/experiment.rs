//! Multi-trial experiment orchestration: runs solver configurations against a
//! corrupted system, merges traces deterministically, and emits CSVs plus
//! plot files. Plots are pure views; every plotted point exists in a CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qrk_core::linalg::{sigma_max, sigma_min_rows, IndexSet, SIGMA_MAX_DEFAULT_TOL};
use qrk_core::problem::CorruptedSystem;
use qrk_core::quantile::ThresholdMode;
use qrk_core::solvers::{
    solve, write_trace_csv, Event, IterateTrace, SolverConfig, Variant, X0Policy, TRACE_CSV_HEADER,
};
use qrk_core::theory::{estimate_sigma_aqb_min, estimate_sigma_from_trace, rate_r, RateParams};
use qrk_core::{RateReport, Result, SeedRng};
use rayon::prelude::*;

use crate::svg::{series_color, LinePlot, Series, LOG_FLOOR};

/// Where the sigma_{alpha,q,beta,min} estimate for bound overlays comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSource {
    /// Minimum sigma_min over random row subsets.
    Sampled { num_samples: usize },
    /// Minimum over the B_k \ C submatrices recorded during the run itself.
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    /// Data + script pair for external rendering.
    Gnuplot,
}

/// One solver configuration within an experiment.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Used in file names: trace_<label>.csv, mean_<label>.csv.
    pub label: String,
    pub variant: Variant,
    pub threshold_mode: ThresholdMode,
    pub record_sigma_trace: bool,
    pub event_quantile: Option<f64>,
    pub x0_policy: X0Policy,
}

impl RunConfig {
    pub fn new(label: impl Into<String>, variant: Variant) -> Self {
        Self {
            label: label.into(),
            variant,
            threshold_mode: ThresholdMode::default(),
            record_sigma_trace: false,
            event_quantile: None,
            x0_policy: X0Policy::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub trials: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub bound_overlay: bool,
    pub sigma_source: SigmaSource,
    pub output_dir: PathBuf,
    pub plot_format: PlotFormat,
}

/// Everything derived from one configuration's trials.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub variant: Variant,
    pub traces: Vec<IterateTrace>,
    /// Index k = mean squared error after k iterations (index 0 = initial).
    pub mean_sq_error: Vec<f64>,
    /// Mean wall-clock seconds at iteration k (index 0 = 0).
    pub mean_time: Vec<f64>,
    pub rate: Option<RateReport>,
    /// r^k * mean initial squared error; present only when r < 1.
    pub bound: Option<Vec<f64>>,
}

impl RunResult {
    pub fn final_mean_sq_error(&self) -> f64 {
        *self.mean_sq_error.last().unwrap()
    }

    /// (p10, p50, p90) of per-trial total wall-clock seconds.
    pub fn wall_clock_percentiles(&self) -> (f64, f64, f64) {
        let mut totals: Vec<f64> = self
            .traces
            .iter()
            .map(|t| t.rows.last().map_or(0.0, |r| r.time_s))
            .collect();
        totals.sort_by(|a, b| a.total_cmp(b));
        let pick = |p: f64| totals[((p * (totals.len() - 1) as f64).round() as usize).min(totals.len() - 1)];
        (pick(0.1), pick(0.5), pick(0.9))
    }
}

/// Run one configuration's trials concurrently. Trial t uses the stream
/// split2(seed, t), so results are independent of scheduling and trial count
/// changes never shift earlier trials.
pub fn run_trials(
    system: &CorruptedSystem,
    cfg: &RunConfig,
    trials: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Vec<IterateTrace>> {
    let base = SeedRng::new(seed);
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut sc = SolverConfig::new(cfg.variant, max_iters, base.split(t as u64).seed());
            sc.threshold_mode = cfg.threshold_mode;
            sc.record_sigma_trace = cfg.record_sigma_trace;
            sc.event_quantile = cfg.event_quantile;
            sc.x0_policy = cfg.x0_policy;
            solve(system, &sc).map(|(_, trace)| trace)
        })
        .collect()
}

/// Arithmetic mean of the trial curves; index 0 is the mean initial error.
pub fn mean_curve(traces: &[IterateTrace], max_iters: usize) -> Vec<f64> {
    let n = traces.len() as f64;
    let mut out = Vec::with_capacity(max_iters + 1);
    out.push(traces.iter().map(|t| t.initial_sq_error).sum::<f64>() / n);
    for k in 0..max_iters {
        out.push(traces.iter().map(|t| t.rows[k].sq_error).sum::<f64>() / n);
    }
    out
}

pub fn mean_time_curve(traces: &[IterateTrace], max_iters: usize) -> Vec<f64> {
    let n = traces.len() as f64;
    let mut out = Vec::with_capacity(max_iters + 1);
    out.push(0.0);
    for k in 0..max_iters {
        out.push(traces.iter().map(|t| t.rows[k].time_s).sum::<f64>() / n);
    }
    out
}

/// Effective (q, alpha) of a quantile variant; QRK is the alpha = 1 case.
fn quantile_params(variant: Variant) -> Option<(f64, f64)> {
    match variant {
        Variant::Qrk { q } => Some((q, 1.0)),
        Variant::Sqrk { q, alpha } => Some((q, alpha)),
        Variant::Rk | Variant::Ssqrk { .. } => None,
    }
}

/// Theoretical rate for the configuration: the quantile-method composite rate
/// for QRK/sQRK, the classical 1 - sigma_min^2/m rate for RK on uncorrupted
/// systems, none otherwise.
pub fn compute_rate(
    system: &CorruptedSystem,
    variant: Variant,
    sigma_source: SigmaSource,
    traces: &[IterateTrace],
    seed: u64,
) -> Result<Option<RateReport>> {
    match variant {
        Variant::Rk => {
            if system.corruption_count() > 0 {
                return Ok(None);
            }
            let s_min = sigma_min_rows(&system.a, &IndexSet::full(system.m()))?;
            let r = 1.0 - s_min.powi(2) / system.m() as f64;
            Ok(Some(RateReport {
                r_g: r,
                r_c_tilde: 1.0,
                r,
                cond_sampling: true,
                cond_quantile: true,
                cond_rate: r < 1.0,
                cond_rate_equiv: r < 1.0,
                is_convergent: r < 1.0,
            }))
        }
        Variant::Ssqrk { .. } => Ok(None),
        Variant::Qrk { .. } | Variant::Sqrk { .. } => {
            let (q, alpha) = quantile_params(variant).unwrap();
            let m = system.m();
            let beta = system.beta;
            let s_max = sigma_max(system.a.inner(), SIGMA_MAX_DEFAULT_TOL)?;
            let sigma = if alpha * q <= beta {
                // Infeasible sampling condition; rate_r reports it as such.
                0.0
            } else {
                match sigma_source {
                    SigmaSource::Sampled { num_samples } => estimate_sigma_aqb_min(
                        &system.a,
                        alpha,
                        q,
                        beta,
                        num_samples,
                        &SeedRng::new(seed).split(0x5157),
                    )?,
                    SigmaSource::Trace => estimate_sigma_from_trace(traces)?,
                }
            };
            let params = RateParams { m, alpha, q, beta, sigma_max: s_max, sigma_aqb_min: sigma };
            rate_r(&params).map(Some)
        }
    }
}

/// Bound overlay values r^k * initial; only for convergent reports
/// ("emitted only when r < 1").
pub fn bound_curve(report: &RateReport, initial: f64, max_iters: usize) -> Option<Vec<f64>> {
    if !report.is_convergent {
        return None;
    }
    let mut out = Vec::with_capacity(max_iters + 1);
    let mut v = initial;
    out.push(v);
    for _ in 0..max_iters {
        v *= report.r;
        out.push(v);
    }
    Some(out)
}

pub fn write_trace_file(path: &Path, traces: &[IterateTrace]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for (t, trace) in traces.iter().enumerate() {
        write_trace_csv(&mut w, t, trace)?;
    }
    Ok(())
}

/// mean_<label>.csv: iter, mean_sq_error, bound (empty when no overlay).
/// A zero-iteration experiment yields a header-only file.
pub fn write_mean_csv(path: &Path, mean: &[f64], bound: Option<&[f64]>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,mean_sq_error,bound")?;
    if mean.len() <= 1 {
        return Ok(());
    }
    for (k, &v) in mean.iter().enumerate() {
        let b = bound.map_or(String::new(), |b| format!("{:.17e}", b[k]));
        writeln!(w, "{k},{v:.17e},{b}")?;
    }
    Ok(())
}

/// Run a group of configurations against one system: per-config trace CSV,
/// mean CSV, then error-vs-iteration and error-vs-time plots for the whole
/// group. Files for each configuration are flushed before the next starts,
/// so a failure mid-group leaves completed configurations on disk.
pub fn run_experiment(
    system: &CorruptedSystem,
    spec: &ExperimentSpec,
    configs: &[RunConfig],
    group: &str,
) -> Result<Vec<RunResult>> {
    std::fs::create_dir_all(&spec.output_dir)?;
    let mut results = Vec::with_capacity(configs.len());
    for cfg in configs {
        let traces = run_trials(system, cfg, spec.trials, spec.max_iters, spec.seed)?;
        write_trace_file(&spec.output_dir.join(format!("trace_{}.csv", cfg.label)), &traces)?;
        let mean = mean_curve(&traces, spec.max_iters);
        let mean_time = mean_time_curve(&traces, spec.max_iters);
        let rate = if spec.bound_overlay {
            compute_rate(system, cfg.variant, spec.sigma_source, &traces, spec.seed)?
        } else {
            None
        };
        let bound = rate.as_ref().and_then(|r| bound_curve(r, mean[0], spec.max_iters));
        write_mean_csv(
            &spec.output_dir.join(format!("mean_{}.csv", cfg.label)),
            &mean,
            bound.as_deref(),
        )?;
        results.push(RunResult {
            label: cfg.label.clone(),
            variant: cfg.variant,
            traces,
            mean_sq_error: mean,
            mean_time,
            rate,
            bound,
        });
    }
    emit_plots(&spec.output_dir, group, &results, spec.plot_format)?;
    Ok(results)
}

/// Two plots per group: mean error vs iteration (with bound overlays) and
/// per-trial cloud vs wall-clock time (with mean overlaid).
pub fn emit_plots(
    out_dir: &Path,
    group: &str,
    results: &[RunResult],
    format: PlotFormat,
) -> Result<()> {
    match format {
        PlotFormat::Svg => {
            let iter_plot = iteration_plot(group, results);
            std::fs::write(out_dir.join(format!("{group}_iter.svg")), iter_plot.render_log_y())?;
            let time_plot = time_plot(group, results);
            std::fs::write(out_dir.join(format!("{group}_time.svg")), time_plot.render_log_y())?;
        }
        PlotFormat::Gnuplot => emit_gnuplot(out_dir, group, results)?,
    }
    Ok(())
}

fn iteration_plot(group: &str, results: &[RunResult]) -> LinePlot {
    let mut series = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let color = series_color(i);
        series.push(Series::line(
            &r.label,
            color,
            r.mean_sq_error.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect(),
        ));
        if let Some(b) = &r.bound {
            series.push(Series::bound(
                &format!("{} bound", r.label),
                color,
                b.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect(),
            ));
        }
    }
    LinePlot {
        title: format!("{group}: mean squared error vs iteration"),
        x_label: "iteration".into(),
        y_label: "squared error".into(),
        series,
    }
}

fn time_plot(group: &str, results: &[RunResult]) -> LinePlot {
    let mut series = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let color = series_color(i);
        for trace in &r.traces {
            let mut pts = vec![(0.0, trace.initial_sq_error)];
            pts.extend(trace.rows.iter().map(|row| (row.time_s, row.sq_error)));
            series.push(Series::cloud(color, pts));
        }
        series.push(Series::line(
            &r.label,
            color,
            r.mean_time.iter().zip(&r.mean_sq_error).map(|(&t, &v)| (t, v)).collect(),
        ));
    }
    LinePlot {
        title: format!("{group}: squared error vs time"),
        x_label: "time (s)".into(),
        y_label: "squared error".into(),
        series,
    }
}

/// Data + script pair: <group>.dat holds the mean (and bound) columns, the
/// .gp script plots them on a log y axis.
fn emit_gnuplot(out_dir: &Path, group: &str, results: &[RunResult]) -> Result<()> {
    let dat_path = out_dir.join(format!("{group}.dat"));
    let mut w = BufWriter::new(File::create(&dat_path)?);
    let iters = results.iter().map(|r| r.mean_sq_error.len()).max().unwrap_or(0);
    let mut header = vec!["iter".to_string()];
    for r in results {
        header.push(r.label.clone());
        if r.bound.is_some() {
            header.push(format!("{}_bound", r.label));
        }
    }
    writeln!(w, "# {}", header.join(" "))?;
    for k in 0..iters {
        let mut row = vec![k.to_string()];
        for r in results {
            let v = r.mean_sq_error.get(k).copied().unwrap_or(f64::NAN).max(LOG_FLOOR);
            row.push(format!("{v:.17e}"));
            if let Some(b) = &r.bound {
                row.push(format!("{:.17e}", b.get(k).copied().unwrap_or(f64::NAN)));
            }
        }
        writeln!(w, "{}", row.join(" "))?;
    }
    drop(w);

    let mut script = String::new();
    script.push_str("set logscale y\nset xlabel 'iteration'\nset ylabel 'squared error'\n");
    script.push_str(&format!("set title '{group}'\nplot "));
    let mut col = 2;
    let mut parts = Vec::new();
    for r in results {
        parts.push(format!("'{group}.dat' using 1:{col} with lines title '{}'", r.label));
        col += 1;
        if r.bound.is_some() {
            parts.push(format!(
                "'{group}.dat' using 1:{col} with lines dashtype 2 title '{} bound'",
                r.label
            ));
            col += 1;
        }
    }
    script.push_str(&parts.join(", \\\n     "));
    script.push('\n');
    std::fs::write(out_dir.join(format!("{group}.gp")), script)?;
    Ok(())
}

/// E1/E2/E3 frequencies across all recorded iterations of all trials.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EventFractions {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: usize,
}

pub fn event_fractions(traces: &[IterateTrace]) -> EventFractions {
    let mut counts = [0usize; 3];
    let mut total = 0usize;
    for t in traces {
        for row in &t.rows {
            if let Some(e) = row.event {
                total += 1;
                match e {
                    Event::E1 => counts[0] += 1,
                    Event::E2 => counts[1] += 1,
                    Event::E3 => counts[2] += 1,
                }
            }
        }
    }
    let n = total.max(1) as f64;
    EventFractions {
        e1: counts[0] as f64 / n,
        e2: counts[1] as f64 / n,
        e3: counts[2] as f64 / n,
        total,
    }
}

/// Per-(lambda, q-mode) summary rows for small-sample experiments.
pub fn write_event_summary(
    path: &Path,
    rows: &[(usize, String, f64, EventFractions, f64)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "lambda,q_mode,q,e1_frac,e2_frac,e3_frac,final_mean_sq_error")?;
    for (lambda, mode, q, ev, final_err) in rows {
        writeln!(
            w,
            "{lambda},{mode},{q},{:.6},{:.6},{:.6},{final_err:.17e}",
            ev.e1, ev.e2, ev.e3
        )?;
    }
    Ok(())
}
