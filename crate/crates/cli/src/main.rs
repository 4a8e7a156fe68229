//! `reach`: data generation, training, evaluation and rendezvous campaigns.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reach_core::models::InputMode;
use reach_core::training::TrainError;

#[derive(Parser, Debug)]
#[command(
    name = "reach",
    version,
    about = "Reaching-target prediction from two arm-mounted IMUs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArg {
    /// Dataset directory written by `gen-data`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic train/test episodes.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Use only the first N board squares.
        #[arg(long)]
        squares: Option<usize>,
        #[arg(long)]
        train_per_square: Option<usize>,
        #[arg(long)]
        test_per_square: Option<usize>,
    },
    /// Train the wrist position network.
    TrainGamma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        mask: Option<String>,
        /// Use the reverse curriculum (config values or defaults).
        #[arg(long)]
        curriculum: bool,
    },
    /// Train the target predictor.
    TrainTarget {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Position network weights; required unless the mode is raw-only.
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Input mode: pos-only, concat or raw-only.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<InputMode>,
        /// Window length.
        #[arg(long = "H", visible_alias = "window")]
        h: Option<usize>,
        /// Use the reverse curriculum.
        #[arg(long)]
        curriculum: bool,
    },
    /// Evaluate trained networks on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        gamma: Option<PathBuf>,
        #[arg(long)]
        phi: Option<PathBuf>,
        /// Also write the per-square error grid.
        #[arg(long)]
        heatmap: bool,
    },
    /// Mask × input-mode ablation table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
    },
    /// Target error against window length.
    HSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        /// Trained position network; trained from the config when omitted.
        #[arg(long)]
        gamma: Option<PathBuf>,
        /// Comma-separated window lengths.
        #[arg(long, value_delimiter = ',')]
        hs: Option<Vec<usize>>,
    },
    /// Simulated robot rendezvous campaign on the test split.
    Rendezvous {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        gamma: Option<PathBuf>,
        #[arg(long)]
        phi: PathBuf,
        /// Feed samples in real time.
        #[arg(long)]
        paced: bool,
    },
}

fn parse_mode(s: &str) -> Result<InputMode, String> {
    InputMode::parse(s).ok_or_else(|| {
        let names: Vec<&str> = InputMode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mode {s:?}; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors exit with 1; 2 is reserved for disqualified curricula.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(
                e.downcast_ref::<TrainError>(),
                Some(TrainError::Disqualified { .. })
            ) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
