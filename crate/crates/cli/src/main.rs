use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod spawn;

use config::{CliConfig, FileConfig, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qvirt", version, about = "Run quantum circuit ensembles on a pool of simulator workers")]
struct Cli {
    /// TOML file supplying defaults for the shared options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Shared {
    /// Worker addresses, comma separated.
    #[arg(long, env = "QVIRT_ENDPOINTS", value_delimiter = ',')]
    endpoints: Option<Vec<String>>,
    /// Number of workers (virtual QPUs) to use.
    #[arg(long)]
    workers: Option<usize>,
    /// Shots per circuit.
    #[arg(long, conflicts_with = "exact")]
    shots: Option<u64>,
    /// Exact expectations from the statevector instead of sampling.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Result file; `.json` selects JSON, anything else CSV.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve a statevector backend over TCP.
    Worker {
        #[arg(long, default_value_t = 7401)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = qvirt::sim::DEFAULT_MAX_QUBITS)]
        max_qubits: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        id: Option<String>,
    },
    /// Execute one circuit file and print its counts.
    Run {
        circuit: PathBuf,
        /// Values for the circuit's parameters, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Scan a one-parameter circuit over evenly spaced angles.
    Scan {
        circuit: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
        stop: f64,
        /// Seconds to wait for all jobs.
        #[arg(long, default_value_t = 600.0)]
        timeout: f64,
        #[command(flatten)]
        shared: Shared,
    },
    /// Minimize a Hamiltonian's energy with Nelder-Mead.
    Vqe {
        hamiltonian: PathBuf,
        /// `hea:DEPTH` or a parameterized circuit file.
        #[arg(long, default_value = "hea:1")]
        ansatz: String,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        ftol: f64,
        /// Initial parameters, comma separated (default all zero).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta0: Vec<f64>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Fixed-parameter energy over a growing number of worker processes.
    Bench {
        #[arg(long, default_value_t = 16)]
        qubits: usize,
        #[arg(long, default_value_t = 3052)]
        terms: usize,
        /// Worker counts to compare, comma separated.
        #[arg(long = "workers", value_delimiter = ',', default_value = "1,2,4")]
        worker_counts: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        shared: BenchShared,
    },
}

/// `bench` reuses the shared options except `--workers`, which is a list there.
#[derive(Debug, Args, Clone, Default)]
pub struct BenchShared {
    #[arg(long, env = "QVIRT_ENDPOINTS", value_delimiter = ',')]
    endpoints: Option<Vec<String>>,
    #[arg(long, conflicts_with = "exact")]
    shots: Option<u64>,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl From<BenchShared> for Shared {
    fn from(b: BenchShared) -> Self {
        Shared {
            endpoints: b.endpoints,
            workers: None,
            shots: b.shots,
            exact: b.exact,
            seed: b.seed,
            output: b.output,
        }
    }
}

fn effective(cli: &Cli, name: &str, shared: Shared, default_shots: Option<u64>) -> Result<CliConfig, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides {
        endpoints: shared.endpoints,
        workers: shared.workers,
        shots: shared.shots,
        exact: shared.exact,
        seed: shared.seed,
        output: shared.output,
        json: cli.json,
    };
    CliConfig::merge(name, cli.config.clone(), file, flags, default_shots)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (name, shared, default_shots) = match &cli.command {
        Command::Worker { .. } => ("worker", Shared::default(), None),
        Command::Run { shared, .. } => ("run", shared.clone(), Some(1024)),
        Command::Scan { shared, .. } => ("scan", shared.clone(), Some(1024)),
        Command::Vqe { shared, .. } => ("vqe", shared.clone(), None),
        Command::Bench { shared, .. } => ("bench", shared.clone().into(), None),
    };
    let config = effective(&cli, name, shared, default_shots)?;
    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    match cli.command {
        Command::Worker {
            port,
            host,
            max_qubits,
            threads,
            id,
        } => commands::worker(&host, port, max_qubits, threads, id),
        Command::Run { circuit, theta, .. } => commands::run(&config, &circuit, &theta),
        Command::Scan {
            circuit,
            points,
            start,
            stop,
            timeout,
            ..
        } => commands::scan(&config, &circuit, points, start, stop, timeout),
        Command::Vqe {
            hamiltonian,
            ansatz,
            max_iters,
            ftol,
            theta0,
            ..
        } => commands::vqe(&config, &hamiltonian, &ansatz, max_iters, ftol, theta0),
        Command::Bench {
            qubits,
            terms,
            worker_counts,
            depth,
            ..
        } => commands::bench(&config, qubits, terms, &worker_counts, depth),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qvirt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
