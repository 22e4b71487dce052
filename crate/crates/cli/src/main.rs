use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "mnas",
    version,
    about = "MCTS architecture search over a cell-based U-Net space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search and write its artifacts to the output directory.
    Search {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate every genotype of a (small) space and report the best.
    Enumerate { config: PathBuf },
    /// Parameter and FLOP counts for a genotype file.
    Analyze {
        genotype: PathBuf,
        /// Take the macro architecture from this run config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Segmentation metrics between two binary masks (PGM P5 or PNG).
    Metrics { pred: PathBuf, truth: PathBuf },
    /// Fraction of the iteration budget saved by stopping early.
    Savings { stop: usize, max: usize },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Search { config, output } => commands::search(&config, output),
        Command::Enumerate { config } => commands::enumerate(&config),
        Command::Analyze { genotype, config } => commands::analyze(&genotype, config.as_deref()),
        Command::Metrics { pred, truth } => commands::metrics(&pred, &truth),
        Command::Savings { stop, max } => commands::savings(stop, max),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("mnas: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
