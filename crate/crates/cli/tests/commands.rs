//! End-to-end command behavior: file outputs, seed precedence, grid
//! expansion, and the analyze pipeline.

use std::path::{Path, PathBuf};
use std::process::Command;

use fedsched_cli::{cmd_analyze, cmd_run, cmd_sweep};
use fedsched_core::config::parse_config;
use fedsched_core::sim::Metric;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fedsched-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn quick_config_text(seed: u64, rounds: usize) -> String {
    format!(
        "\
seed = {seed}

[task]
kind = quadratic
dim = 3
noise_std = 0.1

[network]
devices = 4
sigma = constant:1
model_bits = 1e6

[schedule]
policy = lyapunov
m = 2

[training]
gamma = 0.05
local_steps = 2
rounds = {rounds}

[output]
target_loss = 0.5
"
    )
}

#[test]
fn run_writes_header_plus_one_row_per_round() {
    let dir = tmp_dir("rows");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, quick_config_text(3, 5)).unwrap();
    let artifacts = cmd_run(&cfg, None, Some(&dir.join("out"))).unwrap();
    assert_eq!(artifacts.rounds_run, 5);
    let text = std::fs::read_to_string(&artifacts.rounds_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# fedsched-rounds-v1 devices=4"));
    assert!(lines[1].starts_with("t,n_selected,selected,"));
    assert_eq!(lines.len(), 2 + 5, "schema + header + 5 data rows");
    let summary = std::fs::read_to_string(&artifacts.summary_json).unwrap();
    assert!(summary.contains("\"schema\": \"fedsched-summary-v1\""));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = tmp_dir("seed");
    let cfg_path = dir.join("c.cfg");
    std::fs::write(&cfg_path, quick_config_text(3, 4)).unwrap();

    // config seed
    let a = cmd_run(&cfg_path, None, Some(&dir.join("a"))).unwrap();
    let summary = std::fs::read_to_string(a.summary_json).unwrap();
    assert!(summary.contains("\"seed\": 3"));

    // env overrides config (spawn the binary so the env var is isolated)
    let out_b = dir.join("b");
    let status = Command::new(env!("CARGO_BIN_EXE_fedsched"))
        .args(["run", "--config", cfg_path.to_str().unwrap(), "--out", out_b.to_str().unwrap()])
        .env("FEDSCHED_SEED", "17")
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out_b.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 17"));

    // flag overrides env
    let out_c = dir.join("c");
    let status = Command::new(env!("CARGO_BIN_EXE_fedsched"))
        .args([
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "29",
            "--out",
            out_c.to_str().unwrap(),
        ])
        .env("FEDSCHED_SEED", "17")
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out_c.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 29"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn shipped_reference_config_parses_with_expected_constants() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.cfg");
    let cfg = parse_config(&root).unwrap();
    assert_eq!(cfg.network.devices, 100);
    assert_eq!(cfg.schedule.m, 10);
    assert_eq!(cfg.network.model_bits, Some(17_765_696.0));
    assert!((cfg.p_max_linear() - 3162.2776601683795).abs() < 1e-9);
    assert!((cfg.network.bandwidth - 22e6).abs() < 1e-3);
    cfg.validate().unwrap();
}

#[test]
fn sweep_grid_expands_and_writes_tables() {
    let dir = tmp_dir("sweep");
    std::fs::write(dir.join("base.cfg"), quick_config_text(5, 6)).unwrap();
    std::fs::write(dir.join("grid.grid"), "base = base.cfg\n\n[grid]\nm = 1,2,3\n").unwrap();
    let artifacts = cmd_sweep(&dir.join("grid.grid"), 2, Some(&dir.join("out"))).unwrap();
    assert_eq!(artifacts.rows, 3); // repeats = 1, three cells
    let runs = std::fs::read_to_string(&artifacts.runs_csv).unwrap();
    assert_eq!(runs.lines().count(), 2 + 3);
    let summary = std::fs::read_to_string(&artifacts.summary_csv).unwrap();
    assert_eq!(summary.lines().count(), 2 + 3);
    assert!(summary.lines().nth(2).unwrap().starts_with("m=1,"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn analyze_averages_runs_onto_a_grid() {
    let dir = tmp_dir("analyze");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, quick_config_text(9, 30)).unwrap();
    for (i, seed) in [11u64, 12, 13].iter().enumerate() {
        let out = dir.join(format!("run{i}"));
        cmd_run(&cfg, Some(*seed), Some(&out)).unwrap();
    }
    let pattern = format!("{}/run*/rounds.csv", dir.to_str().unwrap());
    let artifacts = cmd_analyze(
        &[pattern],
        0.05,
        1,
        Some(1e9), // absurd target: crossed at the first grid point
        Metric::TrainLoss,
        Some(&dir.join("avg.csv")),
    )
    .unwrap();
    assert_eq!(artifacts.runs, 3);
    assert!(artifacts.grid_points > 2);
    assert_eq!(artifacts.time_to_target, Some(artifacts_first_time(&dir.join("avg.csv"))));

    let text = std::fs::read_to_string(dir.join("avg.csv")).unwrap();
    assert!(text.starts_with("# fedsched-series-v1 metric=train_loss"));
    std::fs::remove_dir_all(&dir).ok();
}

fn artifacts_first_time(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().nth(2).map(|l| l.split(',').next().unwrap().parse().unwrap())
}

#[test]
fn analyze_cross_checks_against_the_library_averager() {
    // Two synthetic runs with known averages, written through the CSV
    // layer and read back via the command.
    let dir = tmp_dir("xcheck");
    let cfg = dir.join("c.cfg");
    std::fs::write(&cfg, quick_config_text(21, 12)).unwrap();
    let a = cmd_run(&cfg, Some(100), Some(&dir.join("a"))).unwrap();
    let b = cmd_run(&cfg, Some(101), Some(&dir.join("b"))).unwrap();

    let series_a = fedsched_cli::csv::read_series(&a.rounds_csv, Metric::TrainLoss).unwrap();
    let series_b = fedsched_cli::csv::read_series(&b.rounds_csv, Metric::TrainLoss).unwrap();
    let expected =
        fedsched_core::sim::interpolate_and_average(&[series_a, series_b], 0.1, 3).unwrap();

    let out = dir.join("avg.csv");
    cmd_analyze(
        &[
            a.rounds_csv.to_str().unwrap().to_string(),
            b.rounds_csv.to_str().unwrap().to_string(),
        ],
        0.1,
        3,
        None,
        Metric::TrainLoss,
        Some(&out),
    )
    .unwrap();

    let text = std::fs::read_to_string(&out).unwrap();
    let got: Vec<(f64, f64)> = text
        .lines()
        .skip(2)
        .map(|l| {
            let mut it = l.split(',');
            (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(got.len(), expected.len());
    for ((t0, v0), (t1, v1)) in got.iter().zip(expected.iter()) {
        assert!((t0 - t1).abs() < 1e-12 && (v0 - v1).abs() < 1e-12);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn failed_run_flushes_partial_records_and_exits_nonzero() {
    let dir = tmp_dir("fail");
    let cfg = dir.join("c.cfg");
    // Guaranteed divergence: enormous learning rate on a noisy quadratic.
    let text = quick_config_text(3, 200).replace("gamma = 0.05", "gamma = 1e12");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join("out");
    let result = Command::new(env!("CARGO_BIN_EXE_fedsched"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("partial records flushed"), "stderr: {stderr}");
    assert!(out.join("rounds.csv").exists());
    std::fs::remove_dir_all(&dir).ok();
}
