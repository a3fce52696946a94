use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedsched_core::sim::Metric;
use fedsched_cli::{cmd_analyze, cmd_run, cmd_sweep};

/// Simulator for communication-efficient device scheduling in federated
/// learning over fading wireless channels.
#[derive(Parser)]
#[command(name = "fedsched", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        /// Experiment configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override the config (and FEDSCHED_SEED) seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand a grid file and run every cell.
    Sweep {
        /// Grid file: a base config plus axes to expand.
        #[arg(long)]
        grid: PathBuf,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average per-round CSVs onto a uniform time grid and smooth them.
    Analyze {
        /// Per-round CSV files or glob patterns.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<String>,
        /// Interpolation grid step in seconds.
        #[arg(long = "grid-step")]
        grid_step: f64,
        /// Trailing rolling-average window in grid points.
        #[arg(long)]
        window: usize,
        /// Report when the smoothed series crosses this value.
        #[arg(long)]
        target: Option<f64>,
        /// Metric to analyze: `loss` or `accuracy`.
        #[arg(long, default_value = "loss")]
        metric: String,
        /// Output CSV path (default `analyzed.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()).map(|a| {
            println!("wrote {} ({} rounds) and {}", a.rounds_csv.display(), a.rounds_run, a.summary_json.display());
        }),
        Command::Sweep { grid, jobs, out } => cmd_sweep(&grid, jobs, out.as_deref()).map(|a| {
            println!("wrote {} ({} runs) and {}", a.runs_csv.display(), a.rows, a.summary_csv.display());
        }),
        Command::Analyze { inputs, grid_step, window, target, metric, out } => {
            let metric = match metric.as_str() {
                "loss" => Ok(Metric::TrainLoss),
                "accuracy" => Ok(Metric::TestAccuracy),
                other => Err(format!("unknown metric `{other}` (expected loss or accuracy)").into()),
            };
            metric.and_then(|m| cmd_analyze(&inputs, grid_step, window, target, m, out.as_deref())).map(|a| {
                println!("wrote {} ({} runs, {} grid points)", a.series_csv.display(), a.runs, a.grid_points);
                if let Some(crossing) = a.time_to_target {
                    match crossing {
                        Some(t) => println!("time_to_target = {t}"),
                        None => println!("time_to_target = never"),
                    }
                }
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
