//! `hyperpurify` experiment runner.
//!
//! Every subcommand reads one JSON config (`--config`) and writes its
//! results into `--out` (default `.`). Exit codes: 2 for invalid configs,
//! 3 for numerical failures, 1 for I/O errors or a failed `verify`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hyperpurify", version, about = "Purification experiments on hypergraph states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Repeat a fixed sequence and write the fidelity trajectory.
    Run,
    /// Bisect for the noise threshold.
    Threshold,
    /// Rank candidate sequences by threshold.
    Search,
    /// Run the adaptive switching policy.
    Adaptive,
    /// Count inputs per purified output.
    Yield,
    /// Outputs with and without recycling over a fidelity grid.
    RecycleCompare,
    /// Check the fast rules and maps against the dense oracle.
    Verify,
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    if let Some(k) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Command::Verify = cli.command {
        let opts = commands::verify_options(cli.config.as_deref(), cli.seed)?;
        let out = Output::new(&cli.out)?;
        let (report, files) = commands::verify(&opts, Some(&out))?;
        print!("{}", report.summary());
        for f in files {
            eprintln!("wrote {}", f.display());
        }
        return Ok(report.passed());
    }
    let cfg = ConfigFile::load(cli.config.as_deref(), cli.seed)?;
    let out = Output::new(&cli.out)?;
    let files = match cli.command {
        Command::Run => commands::run(&cfg, &out)?,
        Command::Threshold => commands::threshold(&cfg, &out)?,
        Command::Search => commands::search(&cfg, &out)?,
        Command::Adaptive => commands::adaptive(&cfg, &out)?,
        Command::Yield => commands::yields(&cfg, &out)?,
        Command::RecycleCompare => commands::recycle(&cfg, &out)?,
        Command::Verify => unreachable!(),
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hyperpurify: {e}");
            ExitCode::from(e.code())
        }
    }
}
