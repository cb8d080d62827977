//! `nimfa`: reproducible NIMFA SIS experiments writing CSV and metadata.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 counterexample found (`verify` only).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use output::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] nimfa::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "nimfa", version, about = "NIMFA SIS epidemics on static and temporal networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, overriding the configuration (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Override a configuration value by dotted path, e.g. `params.beta=0.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Trajectory of a static graph (or of a sequence) -> trajectory.csv
    Simulate,
    /// Trajectory on a temporal network -> trajectory.csv
    Temporal,
    /// Transition times and bounds over a random graph ensemble -> sweep.csv
    Sweep,
    /// Quenched prediction on a temporal network -> prediction.csv
    Predict,
    /// Markovian SIS ensemble and its mean-field counterpart -> ensemble.csv
    Markov,
    /// Decay envelope and projection checks -> envelope.csv, projection.csv
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Temporal => "temporal",
            Command::Sweep => "sweep",
            Command::Predict => "predict",
            Command::Markov => "markov",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<commands::Found, CliError> {
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let name = cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let mut cfg = config::load(text.as_deref().map(|t| (name.as_str(), t)), &cli.sets)?;
    let command = cli.command.name();
    if let Some(kind) = &cfg.experiment {
        if kind != command {
            return Err(CliError::Config(format!("experiment: file is for {kind:?}, not {command:?}")));
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.params.validate()?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let dir = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut ctx = Ctx {
        command,
        cfg,
        out: Output::create(&dir)?,
        pool,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&mut ctx),
        Command::Temporal => commands::temporal(&mut ctx),
        Command::Sweep => commands::sweep(&mut ctx),
        Command::Predict => commands::predict(&mut ctx),
        Command::Markov => commands::markov(&mut ctx),
        Command::Verify => commands::verify(&mut ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let verify = matches!(cli.command, Command::Verify);
    match run(cli) {
        Ok(found) if verify && found > 0 => {
            eprintln!("verify: {found} counterexample(s) found");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
