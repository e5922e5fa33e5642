//! `qrk`: generate corrupted linear systems and run quantile-based Kaczmarz
//! experiments. Exit codes: 0 success, 1 usage error, 2 numerical failure,
//! 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrk_cli::config::ConfigFile;
use qrk_cli::experiment::{
    event_fractions, run_experiment, write_event_summary, ExperimentSpec, PlotFormat, RunConfig,
    SigmaSource,
};
use qrk_cli::svg::render_bool_grid;
use qrk_core::linalg::{sigma_max, SIGMA_MAX_DEFAULT_TOL};
use qrk_core::problem::{gen_gaussian_system, CorruptedSystem, GenSpec, XStarPolicy};
use qrk_core::theory::{
    estimate_sigma_aqb_min, hypothesis_heatmap, rate_r, write_heatmap_csv, RateParams,
};
use qrk_core::{Error, SeedRng, Variant};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

/// Default output directory environment variable.
const OUT_DIR_ENV: &str = "QRK_OUT_DIR";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError::Usage(s)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::Io(_) | Error::MalformedFile(_) => EXIT_IO,
                Error::InvalidSpec(_) => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "qrk", version, about = "Quantile randomized Kaczmarz experiment harness")]
struct Cli {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $QRK_OUT_DIR, else ./qrk-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a corrupted Gaussian system and serialize it.
    Gen(GenArgs),
    /// Run RK/QRK/sQRK trials and emit convergence CSVs and plots.
    Solve(SolveArgs),
    /// Evaluate the convergence-hypothesis grid for one or more beta values.
    Heatmap(HeatmapArgs),
    /// Sweep the quantile q across sampling rates alpha.
    VaryQ(VaryQArgs),
    /// Run the small-sample variant across lambda values and quantile modes.
    SmallSample(SmallSampleArgs),
    /// Print the theoretical rate report for given parameters.
    Rate(RateArgs),
}

/// Flags describing the system to generate or load. Defaults form the "desk"
/// preset m = 5000, n = 50; --paper-scale switches to m = 50000, n = 100.
#[derive(Args, Clone)]
struct SystemArgs {
    /// Load a serialized system file instead of generating.
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Corruption rate in [0, 1).
    #[arg(long)]
    beta: Option<f64>,
    /// Corruption magnitude.
    #[arg(long)]
    magnitude: Option<f64>,
    /// Give corrupted entries uniformly random signs.
    #[arg(long)]
    signed: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Solution policy: zero | gaussian.
    #[arg(long)]
    x_star: Option<String>,
    /// Full-scale preset (m = 50000, n = 100) instead of the desk preset.
    #[arg(long)]
    paper_scale: bool,
}

impl SystemArgs {
    fn gen_spec(&self, cfg: &ConfigFile) -> CliResult<GenSpec> {
        let (dm, dn) = if self.paper_scale { (50_000, 100) } else { (5_000, 50) };
        let x_star = cfg.resolve(self.x_star.clone(), "x_star", "gaussian".to_string())?;
        let policy = match x_star.as_str() {
            "zero" => XStarPolicy::Zero,
            "gaussian" => XStarPolicy::GaussianUnit,
            other => return Err(CliError::Usage(format!("unknown x_star policy '{other}'"))),
        };
        Ok(GenSpec {
            m: cfg.resolve(self.m, "m", dm)?,
            n: cfg.resolve(self.n, "n", dn)?,
            beta: cfg.resolve(self.beta, "beta", 1e-3)?,
            corruption_magnitude: cfg.resolve(self.magnitude, "magnitude", 10.0)?,
            signed_corruption: self.signed,
            x_star_policy: policy,
            seed: cfg.resolve(self.seed, "seed", 1)?,
        })
    }

    fn load_or_generate(&self, cfg: &ConfigFile) -> CliResult<CorruptedSystem> {
        if let Some(path) = &self.system {
            return Ok(CorruptedSystem::read_binary(path)?);
        }
        let spec = self.gen_spec(cfg)?;
        Ok(gen_gaussian_system(&spec)?)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Output file (default <out-dir>/system.qrks).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also dump the system as CSV next to the binary file.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Quantile parameter q.
    #[arg(long)]
    q: Option<f64>,
    /// Comma-separated sampling rates alpha.
    #[arg(long, default_value = "1,0.5,0.15")]
    alphas: String,
    /// Also run plain RK for comparison.
    #[arg(long)]
    with_rk: bool,
}

/// Flags shared by the experiment-running subcommands.
#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Seed for the solver trial streams (independent of the system seed).
    #[arg(long)]
    run_seed: Option<u64>,
    /// Skip the theoretical bound overlay.
    #[arg(long)]
    no_bound: bool,
    /// Where the sigma estimate for the bound comes from: sampled | trace.
    #[arg(long, default_value = "sampled")]
    sigma_source: String,
    /// Random subsets drawn by the sampled sigma estimator.
    #[arg(long)]
    samples: Option<usize>,
    /// Emit gnuplot data+script pairs instead of SVG plots.
    #[arg(long)]
    gnuplot: bool,
}

impl RunArgs {
    fn spec(&self, cfg: &ConfigFile, out_dir: PathBuf) -> CliResult<ExperimentSpec> {
        let sigma_source = match self.sigma_source.as_str() {
            "sampled" => SigmaSource::Sampled {
                num_samples: cfg.resolve(self.samples, "samples", 100)?,
            },
            "trace" => SigmaSource::Trace,
            other => return Err(CliError::Usage(format!("unknown sigma source '{other}'"))),
        };
        Ok(ExperimentSpec {
            trials: cfg.resolve(self.trials, "trials", 10)?,
            max_iters: cfg.resolve(self.iters, "iters", 1000)?,
            seed: cfg.resolve(self.run_seed, "run_seed", 0)?,
            bound_overlay: !self.no_bound,
            sigma_source,
            output_dir: out_dir,
            plot_format: if self.gnuplot { PlotFormat::Gnuplot } else { PlotFormat::Svg },
        })
    }
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Comma-separated corruption rates to evaluate.
    #[arg(long, default_value = "1e-5,1e-4,1e-3,1e-2")]
    betas: String,
    /// Grid resolution: q and alpha each take this many values in (0, 1).
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for the sigma-estimator subset streams.
    #[arg(long, default_value_t = 0)]
    run_seed: u64,
}

#[derive(Args)]
struct VaryQArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated quantile values.
    #[arg(long, default_value = "0.5,0.7,0.9")]
    qs: String,
    /// Comma-separated sampling rates alpha.
    #[arg(long, default_value = "1,0.5,0.15")]
    alphas: String,
}

#[derive(Args)]
struct SmallSampleArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated sample sizes lambda.
    #[arg(long, default_value = "3,11,51")]
    lambdas: String,
    /// Quantile mode: min (q = 1/lambda), median (q = 1/2),
    /// second-largest (q = (lambda-1)/lambda), or all.
    #[arg(long, default_value = "all")]
    q_mode: String,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Use this sigma_max instead of estimating it from the system.
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Use this sigma_{alpha,q,beta,min} instead of estimating it.
    #[arg(long)]
    sigma_min: Option<f64>,
    /// Explicit m (only needed when both sigmas are given).
    #[arg(long)]
    rows: Option<usize>,
    /// Explicit beta (only needed when both sigmas are given).
    #[arg(long)]
    rate_beta: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    run_seed: u64,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    let vals: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    vals.map_err(|_| CliError::Usage(format!("could not parse {what} list '{s}'")))
}

/// Compact float for file names: 0.5 -> "0.5", 1.0 -> "1".
fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are successes; everything else is a usage error.
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Core(err) => eprintln!("error: {err}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| CliError::Core(Error::Io(e)))?,
        None => ConfigFile::default(),
    };
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qrk-out"));
    match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args, &cfg, &out_dir),
        Cmd::Solve(args) => cmd_solve(args, &cfg, &out_dir),
        Cmd::Heatmap(args) => cmd_heatmap(args, &cfg, &out_dir),
        Cmd::VaryQ(args) => cmd_vary_q(args, &cfg, &out_dir),
        Cmd::SmallSample(args) => cmd_small_sample(args, &cfg, &out_dir),
        Cmd::Rate(args) => cmd_rate(args, &cfg),
    }
}

fn cmd_gen(args: GenArgs, cfg: &ConfigFile, out_dir: &Path) -> CliResult {
    let system = args.sys.load_or_generate(cfg)?;
    let path = match args.output {
        Some(p) => p,
        None => {
            std::fs::create_dir_all(out_dir).map_err(|e| CliError::Core(Error::Io(e)))?;
            out_dir.join("system.qrks")
        }
    };
    system.write_binary(&path)?;
    if args.csv {
        system.write_csv(&path.with_extension("csv"))?;
    }
    println!(
        "m={} n={} corruptions={} seed={} -> {}",
        system.m(),
        system.n(),
        system.corruption_count(),
        system.seed,
        path.display()
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs, cfg: &ConfigFile, out_dir: &Path) -> CliResult {
    let system = args.sys.load_or_generate(cfg)?;
    let q = cfg.resolve(args.q, "q", 0.9)?;
    let alphas: Vec<f64> = parse_list(&args.alphas, "alpha")?;
    let spec = args.run.spec(cfg, out_dir.to_path_buf())?;
    let trace_sigma = spec.sigma_source == SigmaSource::Trace;

    let mut configs = Vec::new();
    if args.with_rk {
        configs.push(RunConfig::new("rk", Variant::Rk));
    }
    for &alpha in &alphas {
        let mut c = RunConfig::new(
            format!("sqrk_q{}_a{}", fmt_num(q), fmt_num(alpha)),
            Variant::Sqrk { q, alpha },
        );
        c.record_sigma_trace = trace_sigma;
        configs.push(c);
    }

    let results = run_experiment(&system, &spec, &configs, "solve")?;
    for r in &results {
        let (p10, p50, p90) = r.wall_clock_percentiles();
        let rate = r
            .rate
            .map_or("-".to_string(), |rep| format!("{:.6} (convergent: {})", rep.r, rep.is_convergent));
        println!(
            "{}: final mean sq_error = {:.3e}, wall-clock p10/p50/p90 = {:.3}/{:.3}/{:.3} s, r = {}",
            r.label,
            r.final_mean_sq_error(),
            p10,
            p50,
            p90,
            rate
        );
    }
    Ok(())
}

fn cmd_heatmap(args: HeatmapArgs, cfg: &ConfigFile, out_dir: &Path) -> CliResult {
    let system = args.sys.load_or_generate(cfg)?;
    let betas: Vec<f64> = parse_list(&args.betas, "beta")?;
    if args.grid == 0 {
        return Err(CliError::Usage("grid must be at least 1".into()));
    }
    let samples = cfg.resolve(args.samples, "samples", 20)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Core(Error::Io(e)))?;

    // grid points strictly inside (0, 1).
    let grid: Vec<f64> =
        (1..=args.grid).map(|i| i as f64 / (args.grid + 1) as f64).collect();
    let s_max = sigma_max(system.a.inner(), SIGMA_MAX_DEFAULT_TOL)?;
    let rng = SeedRng::new(args.run_seed);

    for (bi, &beta) in betas.iter().enumerate() {
        let cells =
            hypothesis_heatmap(&system.a, beta, &grid, &grid, samples, s_max, &rng.split(bi as u64))?;
        let csv_path = out_dir.join(format!("heatmap_beta{}.csv", fmt_num(beta)));
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(&csv_path).map_err(|e| CliError::Core(Error::Io(e)))?,
        );
        write_heatmap_csv(&mut w, &cells)?;
        drop(w);
        let svg = render_bool_grid(
            &format!("hypothesis satisfied, beta = {}", fmt_num(beta)),
            &grid,
            &grid,
            |i, j| cells[i * grid.len() + j].satisfied,
        );
        std::fs::write(out_dir.join(format!("heatmap_beta{}.svg", fmt_num(beta))), svg)
            .map_err(|e| CliError::Core(Error::Io(e)))?;
        let count = cells.iter().filter(|c| c.satisfied).count();
        println!("beta={}: {count}/{} cells satisfied", fmt_num(beta), cells.len());
    }
    Ok(())
}

fn cmd_vary_q(args: VaryQArgs, cfg: &ConfigFile, out_dir: &Path) -> CliResult {
    let system = args.sys.load_or_generate(cfg)?;
    let qs: Vec<f64> = parse_list(&args.qs, "q")?;
    let alphas: Vec<f64> = parse_list(&args.alphas, "alpha")?;
    let spec = args.run.spec(cfg, out_dir.to_path_buf())?;
    let trace_sigma = spec.sigma_source == SigmaSource::Trace;

    for &alpha in &alphas {
        let configs: Vec<RunConfig> = qs
            .iter()
            .map(|&q| {
                let mut c = RunConfig::new(
                    format!("sqrk_q{}_a{}", fmt_num(q), fmt_num(alpha)),
                    Variant::Sqrk { q, alpha },
                );
                c.record_sigma_trace = trace_sigma;
                c
            })
            .collect();
        let group = format!("vary_q_a{}", fmt_num(alpha));
        let results = run_experiment(&system, &spec, &configs, &group)?;
        for r in &results {
            println!("{}: final mean sq_error = {:.3e}", r.label, r.final_mean_sq_error());
        }
    }
    Ok(())
}

fn cmd_small_sample(args: SmallSampleArgs, cfg: &ConfigFile, out_dir: &Path) -> CliResult {
    let system = args.sys.load_or_generate(cfg)?;
    let lambdas: Vec<usize> = parse_list(&args.lambdas, "lambda")?;
    let spec = args.run.spec(cfg, out_dir.to_path_buf())?;

    let mut summary = Vec::new();
    for &lambda in &lambdas {
        let modes: Vec<(&str, f64)> = match args.q_mode.as_str() {
            "min" => vec![("min", 1.0 / lambda as f64)],
            "median" => vec![("median", 0.5)],
            "second-largest" => {
                vec![("second_largest", (lambda as f64 - 1.0) / lambda as f64)]
            }
            "all" => vec![
                ("min", 1.0 / lambda as f64),
                ("median", 0.5),
                ("second_largest", (lambda as f64 - 1.0) / lambda as f64),
            ],
            other => return Err(CliError::Usage(format!("unknown q-mode '{other}'"))),
        };
        let mut configs = Vec::new();
        let mut kept_modes = Vec::new();
        for (mode, q) in modes {
            if !(q > 0.0 && q < 1.0) || (q * lambda as f64).floor() < 1.0 {
                println!("lambda={lambda} mode={mode}: infeasible (floor(q*lambda) = 0), skipped");
                continue;
            }
            let mut c = RunConfig::new(
                format!("ssqrk_l{lambda}_{mode}"),
                Variant::Ssqrk { q, lambda },
            );
            c.event_quantile = Some(q);
            configs.push(c);
            kept_modes.push((mode.to_string(), q));
        }
        if configs.is_empty() {
            continue;
        }
        let group = format!("small_sample_l{lambda}");
        let results = run_experiment(&system, &spec, &configs, &group)?;
        for (r, (mode, q)) in results.iter().zip(&kept_modes) {
            let ev = event_fractions(&r.traces);
            println!(
                "{}: final mean sq_error = {:.3e}, events e1/e2/e3 = {:.3}/{:.3}/{:.3}",
                r.label,
                r.final_mean_sq_error(),
                ev.e1,
                ev.e2,
                ev.e3
            );
            summary.push((lambda, mode.clone(), *q, ev, r.final_mean_sq_error()));
        }
    }
    write_event_summary(&spec.output_dir.join("small_sample_events.csv"), &summary)?;
    Ok(())
}

fn cmd_rate(args: RateArgs, cfg: &ConfigFile) -> CliResult {
    let q = cfg.resolve(args.q, "q", 0.9)?;
    let alpha = cfg.resolve(args.alpha, "alpha", 1.0)?;

    let params = match (args.sigma_max, args.sigma_min) {
        (Some(s_max), Some(s_min)) => {
            let m = args
                .rows
                .ok_or_else(|| CliError::Usage("--rows is required with explicit sigmas".into()))?;
            let beta = args
                .rate_beta
                .ok_or_else(|| CliError::Usage("--rate-beta is required with explicit sigmas".into()))?;
            RateParams { m, alpha, q, beta, sigma_max: s_max, sigma_aqb_min: s_min }
        }
        _ => {
            let system = args.sys.load_or_generate(cfg)?;
            let s_max = match args.sigma_max {
                Some(v) => v,
                None => sigma_max(system.a.inner(), SIGMA_MAX_DEFAULT_TOL)?,
            };
            let s_min = match args.sigma_min {
                Some(v) => v,
                None => {
                    let samples = cfg.resolve(args.samples, "samples", 100)?;
                    estimate_sigma_aqb_min(
                        &system.a,
                        alpha,
                        q,
                        system.beta,
                        samples,
                        &SeedRng::new(args.run_seed),
                    )?
                }
            };
            RateParams {
                m: system.m(),
                alpha,
                q,
                beta: system.beta,
                sigma_max: s_max,
                sigma_aqb_min: s_min,
            }
        }
    };

    let report = rate_r(&params)?;
    println!("m = {}, alpha = {}, q = {}, beta = {}", params.m, params.alpha, params.q, params.beta);
    println!("sigma_max = {:.6}, sigma_aqb_min = {:.6}", params.sigma_max, params.sigma_aqb_min);
    println!("r_G       = {:.9}", report.r_g);
    println!("r_C~      = {:.9}", report.r_c_tilde);
    println!("r         = {:.9}", report.r);
    println!("cond_sampling   (alpha q > beta)      = {}", report.cond_sampling);
    println!("cond_quantile   (alpha (1-q) > beta)  = {}", report.cond_quantile);
    println!("cond_rate                             = {}", report.cond_rate);
    println!("cond_rate (rearranged form)           = {}", report.cond_rate_equiv);
    println!("convergent                            = {}", report.is_convergent);
    Ok(())
}
