use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pairmix::commands::{cmd_evaluate, cmd_fit, cmd_forecast, cmd_ingest, cmd_simulate, Global};

#[derive(Parser)]
#[command(name = "pairmix", version, about = "Bus-pair mixture models for link travel time forecasting")]
struct Cli {
    /// Flat key = value settings for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn an AVL export into a dataset.
    Ingest {
        avl: PathBuf,
        #[arg(long)]
        route: PathBuf,
        #[arg(long)]
        periods: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit the mixture by Gibbs sampling.
    Fit {
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Forecast buses en route at a clock time.
    Forecast {
        posterior: PathBuf,
        observations: PathBuf,
        /// "YYYYMMDD, HH:MM:SS"
        #[arg(long)]
        clock: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score posteriors on held-out pairs.
    Evaluate {
        test: PathBuf,
        #[arg(long = "posterior", required = true)]
        posteriors: Vec<PathBuf>,
        /// Comma separated link counts or shares, e.g. 5,10,15 or 25%,50%.
        #[arg(long)]
        horizons: Option<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Simulate an AVL export with known ground truth.
    Simulate {
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let g = Global { config: cli.config, seed: cli.seed, verbose: cli.verbose };
    let result = match &cli.command {
        Command::Ingest { avl, route, periods, out } => cmd_ingest(&g, avl, route, periods, out),
        Command::Fit { dataset, out } => cmd_fit(&g, dataset, out),
        Command::Forecast { posterior, observations, clock, out } => cmd_forecast(&g, posterior, observations, clock, out),
        Command::Evaluate { test, posteriors, horizons, out } => cmd_evaluate(&g, posteriors, test, horizons.as_deref(), out),
        Command::Simulate { out } => cmd_simulate(&g, out),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
