//! `polyfolio` command line: crisis detection, copula clustering,
//! strategy mixtures and portfolio scores as reproducible batch runs.

mod commands;
mod config;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use polyfolio::market::CsvFormat;
use polyfolio::score::IntegralMethod;

use config::{dispersion_function, risk_function, ClusterMode, DispersionProfile, RiskProfile, RunConfig};

/// Default output directory when `--out` is absent.
const OUT_ENV: &str = "POLYFOLIO_OUT";

/// Failure with its process exit code: 2 for bad input, 3 for numerical trouble.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<polyfolio::Error> for CliError {
    fn from(e: polyfolio::Error) -> Self {
        let code = if e.is_input_error() { 2 } else { 3 };
        Self { code, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "polyfolio", version, about = "Copula crisis indicators and mixed-strategy portfolio scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a price or return CSV into a clean return panel.
    Ingest(Flags),
    /// Rolling copula indicator with warning and crisis intervals.
    Detect(Flags),
    /// Cluster rolling copulas by transport distance or corner features.
    Cluster(Flags),
    /// Build the risk × dispersion strategy mixture and behavioral weights.
    Strategies(Flags),
    /// Score portfolios against the mixture, with min/max/mean and parametric scores.
    Score(Flags),
    /// Distribution of portfolio scores under Gaussian returns.
    ScoreDist(Flags),
    /// Return/volatility copulas of portfolios drawn from mixed strategies.
    AltCopula(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Ingest(f) => ("ingest", f),
            Command::Detect(f) => ("detect", f),
            Command::Cluster(f) => ("cluster", f),
            Command::Strategies(f) => ("strategies", f),
            Command::Score(f) => ("score", f),
            Command::ScoreDist(f) => ("score-dist", f),
            Command::AltCopula(f) => ("alt-copula", f),
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON run configuration (a saved `run_config.json` reproduces a run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $POLYFOLIO_OUT or ./polyfolio-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,

    /// Price or return panel CSV (first column dates, one column per asset).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<CsvFormatArg>,
    /// Market JSON: symbols, sigma, mu, returns and optional evaluation rows.
    #[arg(long)]
    market: Option<PathBuf>,
    /// JSON object of labelled portfolio weights.
    #[arg(long)]
    portfolios: Option<PathBuf>,
    /// Mixture JSON from `strategies`.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Weight region JSON `{"a": [[..]], "b": [..]}`.
    #[arg(long)]
    region: Option<PathBuf>,

    /// Rolling window length in days.
    #[arg(long)]
    window: Option<usize>,
    /// Copula grid size.
    #[arg(long)]
    m: Option<usize>,
    /// Diagonal band width of the indicator.
    #[arg(long)]
    band: Option<f64>,
    #[arg(long)]
    warning_days: Option<usize>,
    #[arg(long)]
    crisis_days: Option<usize>,
    /// Uniform portfolios per copula.
    #[arg(long)]
    samples: Option<usize>,
    /// Dates (YYYY-MM-DD) whose window copula is written; repeatable.
    #[arg(long = "snapshot")]
    snapshots: Vec<NaiveDate>,

    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    cluster_mode: Option<ClusterMode>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    emd_grid: Option<usize>,
    #[arg(long)]
    corner: Option<f64>,

    /// Risk levels.
    #[arg(long)]
    m1: Option<usize>,
    /// Dispersion levels per risk level.
    #[arg(long)]
    m2: Option<usize>,
    /// L1 budget of fully-invested portfolios (long-only when absent).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    estimation_end: Option<NaiveDate>,
    #[arg(long)]
    estimation_days: Option<usize>,
    #[arg(long)]
    evaluation_days: Option<usize>,
    #[arg(long, value_enum)]
    risk: Option<RiskProfile>,
    #[arg(long)]
    risk_x0: Option<f64>,
    #[arg(long)]
    risk_ratio: Option<f64>,
    #[arg(long, value_enum)]
    dispersion: Option<DispersionProfile>,
    #[arg(long)]
    dispersion_x0: Option<f64>,
    #[arg(long)]
    dispersion_ratio: Option<f64>,
    /// Temperatures of the parametric ladder (0 disables it).
    #[arg(long)]
    temperatures: Option<usize>,

    /// Target accuracy of the component integrals.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum)]
    integral: Option<IntegralArg>,
    #[arg(long)]
    direct_samples: Option<usize>,
    /// Return draws of `score-dist`.
    #[arg(long)]
    draws: Option<usize>,
    /// Mixture samples per alternative copula.
    #[arg(long)]
    copula_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum CsvFormatArg {
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum IntegralArg {
    Telescoping,
    Direct,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($field:ident),*) => {
        $(if let Some(v) = $flags.$field.clone() { $cfg.$field = v; })*
    };
}

impl Flags {
    /// Config file (or defaults) with every given flag applied on top.
    fn resolve(&self, command: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if self.config.is_some() && !cfg.command.is_empty() && cfg.command != command {
            return Err(CliError::input(format!("config was saved for `{}`, not `{command}`", cfg.command)));
        }
        cfg.command = command.to_string();
        overlay!(cfg, self, seed, window, m, band, warning_days, crisis_days, samples, k, cluster_mode, stride, emd_grid, corner);
        overlay!(cfg, self, m1, m2, estimation_days, evaluation_days, temperatures, eps, direct_samples, draws, copula_samples);
        for (dst, src) in [
            (&mut cfg.input, &self.input),
            (&mut cfg.market, &self.market),
            (&mut cfg.portfolios, &self.portfolios),
            (&mut cfg.mixture, &self.mixture),
            (&mut cfg.region, &self.region),
        ] {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if self.estimation_end.is_some() {
            cfg.estimation_end = self.estimation_end;
        }
        if !self.snapshots.is_empty() {
            cfg.snapshots = self.snapshots.clone();
        }
        if let Some(f) = self.format {
            cfg.format = match f {
                CsvFormatArg::Prices => CsvFormat::Prices,
                CsvFormatArg::Returns => CsvFormat::Returns,
            };
        }
        if let Some(i) = self.integral {
            cfg.integral = match i {
                IntegralArg::Telescoping => IntegralMethod::Telescoping,
                IntegralArg::Direct => IntegralMethod::Direct,
            };
        }
        if let Some(p) = self.risk {
            cfg.risk = risk_function(p, self.risk_x0, self.risk_ratio);
        } else if self.risk_x0.is_some() || self.risk_ratio.is_some() {
            return Err(CliError::input("--risk-x0 and --risk-ratio need --risk"));
        }
        if let Some(p) = self.dispersion {
            cfg.dispersion = dispersion_function(p, self.dispersion_x0, self.dispersion_ratio);
        } else if self.dispersion_x0.is_some() || self.dispersion_ratio.is_some() {
            return Err(CliError::input("--dispersion-x0 and --dispersion-ratio need --dispersion"));
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("polyfolio-out"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = cli.command.parts();
    let cfg = flags.resolve(name)?;
    if let Some(n) = flags.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::numerical(e.to_string()))?;
    }
    let out = io::Outputs::new(flags.out_dir(), cfg.hash())?;
    out.write_str("run_config.json", &(cfg.to_json() + "\n"))?;
    match cli.command {
        Command::Ingest(_) => commands::ingest(&cfg, &out),
        Command::Detect(_) => commands::detect_cmd(&cfg, &out),
        Command::Cluster(_) => commands::cluster_cmd(&cfg, &out),
        Command::Strategies(_) => commands::strategies(&cfg, &out),
        Command::Score(_) => commands::score_cmd(&cfg, &out),
        Command::ScoreDist(_) => commands::score_dist(&cfg, &out),
        Command::AltCopula(_) => commands::alt_copula(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polyfolio: {e}");
            ExitCode::from(e.code)
        }
    }
}
