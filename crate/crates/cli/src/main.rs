//! `gvasicek`: command-line front end for kernel audits, path simulation,
//! single-path estimation and Monte Carlo studies.
//!
//! Exit codes: 0 on success, 1 on a domain or input error, 2 on a usage
//! error (bad flags, missing or unreadable config).

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use gvasicek::kernels::{increment_bound_constant, KernelName};
use gvasicek::mc::{
    emit_report, read_replications_csv, read_replications_json, run_experiment, records_to_rows, summarize,
    ExperimentConfig, ReportFormat, SummaryContext, SummaryStats,
};
use gvasicek::sampler::{sample_fgn_circulant, sample_path_cholesky};
use gvasicek::vasicek::read_path_csv;
use gvasicek::{
    check_assumption, estimate, CovarianceKernel, Grid, IntegralMode, Kernel, KernelSpec, Scheme, VasicekParams,
    VasicekPath,
};

#[derive(Debug, Parser)]
#[command(name = "gvasicek", version, about = "Vasicek model driven by general Gaussian noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit the structural assumption on a kernel over a time grid.
    KernelCheck(Common),
    /// Simulate one noise path and its Vasicek solution, as `t,G,X` CSV.
    Simulate(Common),
    /// Estimate the drift parameters from a path CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Path CSV with columns `t` and `X`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a Monte Carlo study and write its report.
    Experiment(Common),
    /// Re-summarize an existing replication table.
    Report {
        #[command(flatten)]
        common: Common,
        /// `replications.csv` or `replications.json`.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Flags shared by all subcommands. Values given here override the config.
#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (experiment) or noise seed (simulate).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (simulate, estimate) or directory (experiment, report).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<KernelName>,
    /// Hurst index of the kernel.
    #[arg(long = "H")]
    hurst: Option<f64>,
    /// Mean-reversion speed.
    #[arg(long)]
    k: Option<f64>,
    /// Long-run mean.
    #[arg(long)]
    mu: Option<f64>,
    /// Horizon; a comma-separated list for experiments.
    #[arg(long = "T", value_delimiter = ',')]
    horizons: Vec<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Replications per horizon.
    #[arg(long)]
    reps: Option<usize>,
    /// Interpretation(s) of ∫X dX, comma-separated.
    #[arg(long, value_delimiter = ',')]
    mode: Vec<IntegralMode>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(gvasicek::Error),
}

impl From<gvasicek::Error> for CliError {
    fn from(e: gvasicek::Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Domain(gvasicek::Error::Io { path: path.to_path_buf(), source: e })
}

impl Common {
    fn load_config(&self) -> CliResult<Option<ExperimentConfig>> {
        let Some(path) = &self.config else { return Ok(None) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
            .map(Some)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    fn kernel_spec(&self, config: Option<&ExperimentConfig>) -> CliResult<KernelSpec> {
        let base = config.map(|c| c.kernel);
        let name = self.kernel.or(base.map(|b| b.name)).unwrap_or(KernelName::Fbm);
        let hurst = self
            .hurst
            .or(base.map(|b| b.hurst))
            .ok_or_else(|| usage("the kernel needs --H (or a config)"))?;
        Ok(KernelSpec { name, hurst })
    }

    fn params(&self, config: Option<&ExperimentConfig>) -> CliResult<VasicekParams> {
        let base = config.map(|c| c.params);
        let k = self.k.or(base.map(|p| p.k)).ok_or_else(|| usage("missing --k (or a config)"))?;
        let mu = self.mu.or(base.map(|p| p.mu)).ok_or_else(|| usage("missing --mu (or a config)"))?;
        let sigma = base.map_or(1.0, |p| p.sigma);
        Ok(VasicekParams::new(k, mu, sigma)?)
    }

    /// Config with every given flag applied on top.
    fn experiment_config(&self) -> CliResult<ExperimentConfig> {
        let mut config = self.load_config()?.ok_or_else(|| usage("experiment needs --config"))?;
        config.kernel = self.kernel_spec(Some(&config))?;
        config.params = self.params(Some(&config))?;
        if !self.horizons.is_empty() {
            config.horizons = self.horizons.clone();
        }
        if let Some(dt) = self.dt {
            config.dt = dt;
        }
        if let Some(m) = self.reps {
            config.replications = m;
        }
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if !self.mode.is_empty() {
            config.modes = self.mode.clone();
        }
        config.validate()?;
        Ok(config)
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(usage("--threads must be at least 1"));
            }
            builder = builder.num_threads(n);
        }
        builder.build().map_err(|e| usage(format!("cannot start thread pool: {e}")))
    }
}

fn kernel_check(c: &Common, out: &mut dyn Write) -> CliResult<bool> {
    let config = c.load_config()?;
    let spec = c.kernel_spec(config.as_ref())?;
    let kernel = Kernel::from_spec(&spec)?;
    let horizon = c.horizons.first().copied().unwrap_or(5.0);
    let dt = c.dt.or(config.as_ref().map(|c| c.dt)).unwrap_or(0.1);
    let grid = Grid::from_horizon(horizon, dt)?;
    let report = check_assumption(&kernel, &grid)?;
    let w = |e| io_error(Path::new("<stdout>"), e);
    writeln!(out, "kernel          {}", kernel.name()).map_err(w)?;
    writeln!(out, "beta            {}", kernel.beta()).map_err(w)?;
    writeln!(out, "c_beta          {}", kernel.c_beta()).map_err(w)?;
    writeln!(out, "c_beta_prime    {}", kernel.c_beta_prime()).map_err(w)?;
    writeln!(out, "increment_bound {}", increment_bound_constant(&kernel)).map_err(w)?;
    writeln!(out, "grid            n={} dt={}", grid.steps(), grid.dt()).map_err(w)?;
    let (t, s) = report.worst_pair;
    writeln!(out, "worst_pair      ({t}, {s})").map_err(w)?;
    writeln!(out, "bound           {}", report.bound).map_err(w)?;
    let verdict = if report.passes { "PASS" } else { "FAIL" };
    writeln!(out, "{verdict} max_ratio={}", report.max_ratio).map_err(w)?;
    Ok(report.passes)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(std::io::stdout())),
        Some(p) => Ok(Box::new(File::create(p).map_err(|e| io_error(p, e))?)),
    }
}

fn simulate(c: &Common) -> CliResult<()> {
    let config = c.load_config()?;
    let spec = c.kernel_spec(config.as_ref())?;
    let kernel = Kernel::from_spec(&spec)?;
    let params = c.params(config.as_ref())?;
    let horizon = match (c.horizons.as_slice(), &config) {
        ([t], _) => *t,
        ([], Some(cfg)) if !cfg.horizons.is_empty() => cfg.horizons[0],
        ([], _) => return Err(usage("missing --T (or a config)")),
        _ => return Err(usage("simulate takes a single --T")),
    };
    let dt = c.dt.or(config.as_ref().map(|c| c.dt)).ok_or_else(|| usage("missing --dt (or a config)"))?;
    let seed = c.seed.or(config.as_ref().map(|c| c.master_seed)).unwrap_or(0);
    let grid = Grid::from_horizon(horizon, dt)?;
    let noise = match kernel.fbm_hurst() {
        Some(h) => sample_fgn_circulant(h, grid.steps(), grid.dt(), seed)?,
        None => sample_path_cholesky(&kernel, &grid, seed)?,
    };
    let x0 = config.as_ref().map_or(0.0, |c| c.x0);
    let path = gvasicek::vasicek::simulate_vasicek_from(&params, &noise, Scheme::ExactRecursion, x0)?;
    path.write_csv(&noise, open_output(c.out.as_deref())?)?;
    Ok(())
}

fn estimate_cmd(c: &Common, input: &Path) -> CliResult<()> {
    let config = c.load_config()?;
    let spec = c.kernel_spec(config.as_ref())?;
    let kernel = Kernel::from_spec(&spec)?;
    let (grid, values) = read_path_csv(input)?;
    let base = config.as_ref().map(|c| c.params);
    let truth_k = c.k.or(base.map(|p| p.k));
    // Only σ enters the estimators; k and μ are placeholders unless given.
    let params = VasicekParams::new(
        truth_k.unwrap_or(1.0),
        c.mu.or(base.map(|p| p.mu)).unwrap_or(0.0),
        base.map_or(1.0, |p| p.sigma),
    )?;
    let path = VasicekPath::from_observations(grid, values, params)?;
    let modes = if c.mode.is_empty() { vec![IntegralMode::SkorohodPlugin] } else { c.mode.clone() };
    let sets = modes
        .iter()
        .map(|&m| estimate(&path, &kernel, m, truth_k))
        .collect::<gvasicek::Result<Vec<_>>>()?;
    let json = if sets.len() == 1 {
        serde_json::to_string_pretty(&sets[0])
    } else {
        serde_json::to_string_pretty(&sets)
    }
    .map_err(gvasicek::Error::from)?;
    let target = c.out.as_deref();
    let mut out = open_output(target)?;
    writeln!(out, "{json}").map_err(|e| io_error(target.unwrap_or(Path::new("<stdout>")), e))?;
    Ok(())
}

fn print_summary(summary: &SummaryStats, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:<22} {:>8} {:>6} {:>10} {:>10}  candidates", "estimator", "T", "valid", "mean", "variance")?;
    for cell in &summary.cells {
        let fits: Vec<String> = cell
            .candidates
            .iter()
            .map(|f| {
                let p = f.ks.map_or("-".to_string(), |k| format!("{:.3}", k.p));
                format!("{}(ratio={:.3},p={p})", f.name, f.ratio)
            })
            .collect();
        writeln!(
            out,
            "{:<22} {:>8} {:>6} {:>10.4} {:>10.4}  {}",
            cell.estimator,
            cell.horizon,
            cell.valid,
            cell.mean,
            cell.variance,
            fits.join(" ")
        )?;
    }
    for check in &summary.consistency {
        let verdict = if check.decreasing { "decreasing" } else { "NOT decreasing" };
        writeln!(out, "consistency {:<22} median |error| {verdict}", check.estimator)?;
    }
    Ok(())
}

fn default_out() -> PathBuf {
    PathBuf::from("gvasicek-report")
}

fn experiment(c: &Common) -> CliResult<()> {
    let config = c.experiment_config()?;
    let pool = c.pool()?;
    let records = pool.install(|| run_experiment(&config))?;
    let rows = records_to_rows(&records, &config)?;
    let summary = summarize(&rows, &SummaryContext::for_config(&config)?)?;
    let out_dir = c.out.clone().unwrap_or_else(default_out);
    emit_report(&summary, &rows, ReportFormat::Csv, &out_dir)?;
    print_summary(&summary, &mut std::io::stdout()).map_err(|e| io_error(Path::new("<stdout>"), e))?;
    Ok(())
}

fn report(c: &Common, input: &Path) -> CliResult<()> {
    let config = c.experiment_config()?;
    let (rows, format) = match input.extension().and_then(|e| e.to_str()) {
        Some("json") => (read_replications_json(input)?, ReportFormat::Json),
        _ => (read_replications_csv(input)?, ReportFormat::Csv),
    };
    let summary = summarize(&rows, &SummaryContext::for_config(&config)?)?;
    let out_dir = match &c.out {
        Some(d) => d.clone(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_else(default_out),
    };
    emit_report(&summary, &rows, format, &out_dir)?;
    print_summary(&summary, &mut std::io::stdout()).map_err(|e| io_error(Path::new("<stdout>"), e))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    match &cli.command {
        Command::KernelCheck(c) => kernel_check(c, &mut std::io::stdout()),
        Command::Simulate(c) => c.pool()?.install(|| simulate(c)).map(|_| true),
        Command::Estimate { common, input } => common.pool()?.install(|| estimate_cmd(common, input)).map(|_| true),
        Command::Experiment(c) => experiment(c).map(|_| true),
        Command::Report { common, input } => common.pool()?.install(|| report(common, input)).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
