//! `fatiq`: runs the fatigue experiments and writes their data as CSV.
//!
//! Every run writes into `<out-dir>/<subcommand>/` the CSV artifacts, the
//! resolved configuration as `config.toml` and a `manifest.json` with the
//! SHA-256 of each file. Rerunning with `--config <dir>/config.toml`
//! reproduces the CSV files byte for byte.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::{Artifacts, CheckReport, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(#[from] fatiq::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} check(s) failed")]
    Check(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Check(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "fatiq", version, about = "Probabilistic fatigue experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; omitted sections use the reference experiment
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory of the per-subcommand output directory
    #[arg(long, default_value = "fatiq-out")]
    out_dir: PathBuf,
    /// Master seed, overrides `mc.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications, overrides `mc.replications`
    #[arg(long)]
    replications: Option<usize>,
    /// Run the acceptance assertions and exit with status 4 on failure
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated S-N fatigue test at constant severities
    SnSimulate(Common),
    /// Survival and Miner damage under a variable severity sequence
    MinerDemo(Common),
    /// Severity field, structure constant, survival and failure density of the I-beam
    Beam(Common),
    /// Fitted random load laws and the resulting structure survival
    RandomLoad(Common),
    /// Deterministic equivalent loads of random loads
    EquivLoad(Common),
    /// Laplace approximation of the severity integral against quadrature
    Laplace {
        #[command(flatten)]
        common: Common,
        /// Exponents `k = αm`, comma separated; overrides `laplace.k`
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
}

type Runner = fn(&RunConfig, &mut Artifacts, Option<&mut CheckReport>) -> Result<(), CliError>;

fn init_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("FATIQ_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("FATIQ_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(rayon::current_num_threads())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let (name, runner, common, k): (&str, Runner, Common, Option<Vec<f64>>) = match cli.command {
        Command::SnSimulate(c) => ("sn-simulate", commands::sn_simulate, c, None),
        Command::MinerDemo(c) => ("miner-demo", commands::miner_demo, c, None),
        Command::Beam(c) => ("beam", commands::beam, c, None),
        Command::RandomLoad(c) => ("random-load", commands::random_load, c, None),
        Command::EquivLoad(c) => ("equiv-load", commands::equiv_load, c, None),
        Command::Laplace { common, k } => ("laplace", commands::laplace, common, k),
    };

    let mut cfg = match &common.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            let base = path.parent().unwrap_or(std::path::Path::new("."));
            cfg.resolve_paths(base)?;
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.mc.seed = seed;
    }
    if let Some(r) = common.replications {
        cfg.mc.replications = r;
    }
    if let Some(k) = k {
        cfg.laplace.k = k;
    }
    cfg.validate(name)?;
    let threads = init_threads()?;

    let mut out = Artifacts::create(&common.out_dir.join(name))?;
    out.write("config.toml", cfg.to_toml().as_bytes())?;
    let mut report = common.check.then(CheckReport::default);
    runner(&cfg, &mut out, report.as_mut())?;

    let manifest = RunManifest {
        subcommand: name,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.mc.seed,
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
        config: &cfg,
        outputs: out.files(),
        check: report.as_ref(),
    };
    let mut data = serde_json::to_vec_pretty(&manifest)?;
    data.push(b'\n');
    std::fs::write(out.dir().join("manifest.json"), data)?;
    println!("wrote {} files to {}", out.files().len(), out.dir().display());

    match report.map(|r| r.failures()) {
        Some(n) if n > 0 => Err(CliError::Check(n)),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fatiq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
