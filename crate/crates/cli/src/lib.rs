//! Command implementations behind the `fedsched` binary: `run`, `sweep`,
//! and `analyze`, plus the bit-stable CSV writers they share.
//!
//! Seed precedence for `run`: the `--seed` flag beats the `FEDSCHED_SEED`
//! environment variable, which beats the config file's `seed`.

pub mod csv;
pub mod grid;

use std::path::{Path, PathBuf};

use fedsched_core::config::parse_config;
use fedsched_core::sim::{self, interpolate_and_average, Metric, RunOutput};

pub type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Files produced by `cmd_run`.
#[derive(Debug)]
pub struct RunArtifacts {
    pub rounds_csv: PathBuf,
    pub summary_json: PathBuf,
    pub rounds_run: usize,
}

fn seed_override_from_env() -> CliResult<Option<u64>> {
    match std::env::var("FEDSCHED_SEED") {
        Ok(v) => {
            let parsed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| format!("FEDSCHED_SEED must be an unsigned integer, got `{v}`"))?;
            Ok(Some(parsed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Box::new(e)),
    }
}

/// Run one experiment and write `rounds.csv` + `summary.json` into the
/// output directory. On a mid-run failure the completed rounds are still
/// flushed before the error is reported.
pub fn cmd_run(config_path: &Path, seed_flag: Option<u64>, out_dir: Option<&Path>) -> CliResult<RunArtifacts> {
    let cfg = parse_config(config_path).map_err(|e| e.to_string())?;
    let seed = match seed_flag {
        Some(s) => s,
        None => seed_override_from_env()?.unwrap_or(cfg.seed),
    };
    let out = out_dir.unwrap_or_else(|| Path::new("out"));
    std::fs::create_dir_all(out)?;
    let rounds_csv = out.join("rounds.csv");
    let summary_json = out.join("summary.json");

    match sim::run_with_seed(&cfg, seed) {
        Ok(RunOutput { records, summary }) => {
            std::fs::write(&rounds_csv, csv::rounds_csv(&records, cfg.network.devices))?;
            let mut json = serde_json::to_string_pretty(&summary)?;
            json.push('\n');
            std::fs::write(&summary_json, json)?;
            Ok(RunArtifacts { rounds_csv, summary_json, rounds_run: records.len() })
        }
        Err(failure) => {
            std::fs::write(&rounds_csv, csv::rounds_csv(&failure.records, cfg.network.devices))?;
            Err(format!(
                "run failed: {failure}; partial records flushed to {}",
                rounds_csv.display()
            )
            .into())
        }
    }
}

/// Files produced by `cmd_sweep`.
#[derive(Debug)]
pub struct SweepArtifacts {
    pub runs_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub rows: usize,
}

/// Expand a grid file into configurations and run them, at most `jobs`
/// concurrently; write per-run rows and per-cell aggregate rows.
pub fn cmd_sweep(grid_path: &Path, jobs: usize, out_dir: Option<&Path>) -> CliResult<SweepArtifacts> {
    let items = grid::load_grid(grid_path)?;
    let rows = sim::sweep(&items, jobs);

    let out = out_dir.unwrap_or_else(|| Path::new("out"));
    std::fs::create_dir_all(out)?;
    let runs_csv = out.join("sweep_runs.csv");
    let summary_csv = out.join("sweep_summary.csv");
    std::fs::write(&runs_csv, csv::sweep_runs_csv(&rows))?;
    std::fs::write(&summary_csv, csv::sweep_summary_csv(&rows))?;
    Ok(SweepArtifacts { runs_csv, summary_csv, rows: rows.len() })
}

/// Outcome of `cmd_analyze`.
#[derive(Debug)]
pub struct AnalyzeArtifacts {
    pub series_csv: PathBuf,
    pub runs: usize,
    pub grid_points: usize,
    /// Time at which the smoothed averaged series crosses the target, when
    /// a target was given.
    pub time_to_target: Option<Option<f64>>,
}

/// Load per-round CSVs (glob patterns allowed), interpolate each run's
/// metric onto a uniform time grid, average across runs, smooth with a
/// trailing window, and write the result.
pub fn cmd_analyze(
    inputs: &[String],
    grid_step: f64,
    window: usize,
    target: Option<f64>,
    metric: Metric,
    out_path: Option<&Path>,
) -> CliResult<AnalyzeArtifacts> {
    let mut paths: Vec<PathBuf> = Vec::new();
    for pattern in inputs {
        if pattern.contains('*') || pattern.contains('?') || pattern.contains('[') {
            let mut matched: Vec<PathBuf> =
                glob::glob(pattern)?.collect::<Result<Vec<_>, _>>()?;
            if matched.is_empty() {
                return Err(format!("pattern `{pattern}` matched no files").into());
            }
            matched.sort();
            paths.extend(matched);
        } else {
            paths.push(PathBuf::from(pattern));
        }
    }

    let mut runs = Vec::with_capacity(paths.len());
    for p in &paths {
        let series = csv::read_series(p, metric)?;
        if series.is_empty() {
            return Err(format!("{} holds no evaluated rounds for the requested metric", p.display()).into());
        }
        runs.push(series);
    }

    let averaged = interpolate_and_average(&runs, grid_step, window)?;
    let out = out_path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("analyzed.csv"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&out, csv::series_csv(&averaged, metric))?;

    let time_to_target = target.map(|tgt| {
        averaged
            .iter()
            .find(|(_, v)| match metric {
                Metric::TrainLoss => *v <= tgt,
                Metric::TestAccuracy => *v >= tgt,
            })
            .map(|(t, _)| *t)
    });

    Ok(AnalyzeArtifacts { series_csv: out, runs: runs.len(), grid_points: averaged.len(), time_to_target })
}

