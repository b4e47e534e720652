//! Command-line front end: one subcommand per experiment family, TOML configs,
//! CSV outputs and a reproducibility manifest in every output directory.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "nnpde", version, about = "Neural-network source terms in elliptic PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration; defaults are used for absent sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed override, applied to every section.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory (default: $NNPDE_OUT, then ./nnpde-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network by adjoint gradient descent.
    Train,
    /// Train over widths and seeds and tabulate median objectives.
    Sweep,
    /// Integrate the mean-field limit system.
    Limit,
    /// Eigenvalues of the limit kernel operator.
    Spectra,
    /// Distance between finite-width training and the limit system.
    Compare,
    /// Channel-flow k-epsilon solve and closure training.
    Rans {
        /// Override `[rans].net`.
        #[arg(long, value_enum)]
        net: Option<Switch>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::Limit => "limit",
            Command::Spectra => "spectra",
            Command::Compare => "compare",
            Command::Rans { .. } => "rans",
        }
    }
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.override_seed(s);
    }
    if let Command::Rans { net: Some(n) } = cli.command {
        cfg.rans.net = n == Switch::On;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("NNPDE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nnpde-out"));

    let run = || commands::dispatch(&cli, &cfg, &out);
    let result = match nnpde::par::with_workers(cli.jobs, run) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
