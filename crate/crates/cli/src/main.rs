//! `eivgof`: fit, test and simulate the multivariate errors-in-variables model.

mod config;
mod input;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eivgof::sim::{monte_carlo_level, monte_carlo_power, validate_estimator_clt, ReplicateRecord};
use eivgof::{
    run_test, tls_estimate, Decision, EivDataset, Error, NuisanceEstimates, SymMatrix,
};
use serde::Serialize;

use config::ConfigFile;

/// An error that ends the process with a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const USAGE: u8 = 2;
    pub const ESTIMATOR: u8 = 3;
    pub const COVARIANCE: u8 = 4;

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::usage(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::NoFiniteSolution { .. } | Error::DegenerateInput { .. } => Failure::ESTIMATOR,
            Error::CovarianceNotPd { .. } | Error::NotPositiveDefinite { .. } => Failure::COVARIANCE,
            _ => Failure::USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "eivgof", version, about = "Total least squares and goodness-of-fit for AX ≈ B")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// CSV with header a1..an,b1..bd
    csv: PathBuf,
    /// Number of a-columns (checked against the header)
    #[arg(long)]
    n: Option<usize>,
    /// Number of b-columns (checked against the header)
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate X and the nuisance parameters
    Fit(DataArgs),
    /// Run the goodness-of-fit test; exits 1 on rejection
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Monte Carlo study driven by a TOML config
    Simulate {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Level)]
        mode: Mode,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Write per-replicate results as CSV (level and power modes)
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Overrides master_seed from the config
        #[arg(long, env = "EIV_GOF_SEED")]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Level,
    Power,
    Clt,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    m: usize,
    n: usize,
    d: usize,
    #[serde(serialize_with = "rows")]
    x_hat: &'a eivgof::DMatrix<f64>,
    sigma2_hat: f64,
    va_hat: &'a SymMatrix,
    mu_a_hat: &'a [f64],
    loss: f64,
    singular_values: &'a [f64],
    singular_gap: f64,
    score_residual: f64,
}

fn rows<S: serde::Serializer>(m: &&eivgof::DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

#[derive(Serialize)]
struct SimulateOutput<R: Serialize> {
    mode: Mode,
    config: ConfigFile,
    report: R,
    wall_time_s: f64,
}

fn load_dataset(args: &DataArgs) -> Result<EivDataset, Failure> {
    let file = File::open(&args.csv).map_err(|e| Failure::io(&args.csv, e))?;
    input::read_dataset(io::BufReader::new(file), args.n, args.d)
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::usage(format!("cannot serialize output: {e}")))?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Failure::usage(format!("stdout: {e}")))
}

fn fit(args: &DataArgs) -> Result<u8, Failure> {
    let data = load_dataset(args)?;
    let fit = tls_estimate(&data)?;
    let nuisance = NuisanceEstimates::estimate(&data, &fit.x_hat)?;
    print_json(&FitOutput {
        m: data.m(),
        n: data.n(),
        d: data.d(),
        x_hat: &fit.x_hat,
        sigma2_hat: nuisance.sigma2_hat,
        va_hat: &nuisance.va_hat,
        mu_a_hat: nuisance.mu_a_hat.as_slice(),
        loss: fit.loss_at_solution,
        singular_values: &fit.singular_values,
        singular_gap: fit.singular_gap,
        score_residual: fit.score_residual,
    })?;
    Ok(0)
}

fn test(args: &DataArgs, alpha: f64) -> Result<u8, Failure> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Failure::usage(format!("--alpha must lie in (0, 0.5), got {alpha}")));
    }
    let data = load_dataset(args)?;
    let report = run_test(&data, alpha)?;
    print_json(&report)?;
    Ok(match report.decision {
        Decision::Accept => 0,
        Decision::Reject => 1,
    })
}

fn write_dump(path: &Path, records: &[ReplicateRecord]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Failure::usage(format!("{}: {e}", path.display()));
    w.write_record(["rep", "t2", "p_value", "rejected", "failure"]).map_err(fail)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.rep.to_string(),
            opt(r.t2),
            opt(r.p_value),
            r.rejected.map(|b| b.to_string()).unwrap_or_default(),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

fn emit<R: Serialize>(mode: Mode, config: ConfigFile, report: &R, start: Instant) -> Result<(), Failure> {
    print_json(&SimulateOutput {
        mode,
        config,
        report,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn simulate(
    path: &Path,
    mode: Mode,
    threads: Option<usize>,
    dump: Option<&Path>,
    seed: Option<u64>,
) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut file = ConfigFile::parse(&text)?;
    if let Some(seed) = seed {
        file.master_seed = seed;
    }
    let config = file.to_sim_config()?;
    match mode {
        Mode::Power if config.alternative.is_none() => {
            return Err(Failure::usage("power mode needs an [alternative] section in the config"));
        }
        Mode::Clt if dump.is_some() => {
            return Err(Failure::usage("--dump is only available in level and power modes"));
        }
        _ => {}
    }
    if threads == Some(0) {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::usage(format!("cannot start thread pool: {e}")))?;

    let start = Instant::now();
    match mode {
        Mode::Level => {
            let report = pool.install(|| monte_carlo_level(&config))?;
            if let Some(p) = dump {
                write_dump(p, &report.replicates)?;
            }
            emit(mode, file, &report, start)?;
        }
        Mode::Power => {
            let report = pool.install(|| monte_carlo_power(&config))?;
            if let Some(p) = dump {
                write_dump(p, &report.empirical.replicates)?;
            }
            emit(mode, file, &report, start)?;
        }
        Mode::Clt => {
            let m_values = file.clt_m_values();
            let report = pool.install(|| validate_estimator_clt(&config, &m_values))?;
            emit(mode, file, &report, start)?;
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Fit(args) => fit(args),
        Command::Test { data, alpha } => test(data, *alpha),
        Command::Simulate {
            config,
            mode,
            threads,
            dump,
            seed,
        } => simulate(config, *mode, *threads, dump.as_deref(), *seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
