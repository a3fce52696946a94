//! The round loop and wall-clock accountant.
//!
//! Each round: draw channel gains, ask the policy for a decision, draw
//! participants, run local SGD on every distinct selected device, aggregate
//! with inverse-probability weights, advance virtual queues (for policies
//! that use them), and record metrics. Round wall-clock time is the
//! constant parallel computation time plus the sum of the selected
//! devices' sequential TDMA uplink times.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::channel::{comm_time, draw_channel};
use crate::config::{GammaSpec, SimConfig};
use crate::error::{Error, Result};
use crate::fltrain::{
    aggregate, build_task, evaluate_bound, local_sgd, recommended_stepsize, BoundParams,
    GlobalModel, Task,
};
use crate::numerics::RngStreams;
use crate::policy::{build_policy, RoundContext};
use crate::sampling::{draw_participants, q_from_omega};
use crate::scheduler::{update_queues, VirtualQueues};

/// Constant per-round computation time; computation runs in parallel
/// across devices, so it enters the clock once per round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeModel {
    pub tau_comp: f64,
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// Distinct selected device indices, ascending.
    pub selected: Vec<usize>,
    pub comm_time_total: f64,
    pub comp_time: f64,
    pub cum_time: f64,
    /// Global training loss after this round's update; `None` on rounds
    /// without an evaluation.
    pub train_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub objective_value: f64,
    pub solver_iters: usize,
    pub solver_converged: bool,
    pub q: Vec<f64>,
    pub power: Vec<f64>,
    /// Virtual queue states after this round's update.
    pub queues: Vec<f64>,
    pub gains: Vec<f64>,
    /// Realized transmit power: `P_n` when selected, zero otherwise.
    pub realized_power: Vec<f64>,
    /// Running mean of expected power `P_n * q_n` through this round.
    pub running_avg_power: Vec<f64>,
}

/// Scalar bound components for the run summary.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundSummary {
    pub c: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub mean_q: f64,
    pub rhs: f64,
    pub stepsize_ok: bool,
    pub smoothness: f64,
    pub noise_var: f64,
    pub divergence_sq: f64,
    /// Whether the task constants are analytic or sampled estimates.
    pub exact: bool,
    pub q_min_realized: f64,
}

/// End-of-run summary, serialized to JSON by the CLI.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub schema: String,
    /// Canonical text of the configuration that produced the run.
    pub config_text: String,
    pub policy: String,
    pub task: String,
    pub seed: u64,
    pub devices: usize,
    pub draws: usize,
    pub rounds_run: usize,
    /// Resolved learning rate (after `auto` expansion).
    pub gamma: f64,
    pub initial_loss: f64,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub total_time: f64,
    pub time_to_target_loss: Option<f64>,
    pub time_to_target_accuracy: Option<f64>,
    /// Fraction of rounds each device participated in.
    pub selection_frequency: Vec<f64>,
    /// Final running mean of `P_n * q_n` per device.
    pub final_running_avg_power: Vec<f64>,
    /// Ratio of the above to the per-device budget.
    pub power_budget_ratio: Vec<f64>,
    pub solver_unconverged_rounds: usize,
    pub mean_solver_iters: f64,
    pub bound: Option<BoundSummary>,
    pub bound_note: Option<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
}

/// A failed run, carrying the rounds completed before the failure so they
/// can still be flushed.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub records: Vec<RoundRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} completed rounds)", self.error, self.records.len())
    }
}

impl std::error::Error for RunFailure {}

/// Resolve the configured learning rate against the task's constants.
fn resolve_gamma(cfg: &SimConfig, task: &dyn Task) -> Result<f64> {
    match cfg.training.gamma {
        GammaSpec::Fixed(g) => Ok(g),
        GammaSpec::Auto => {
            let q_min = q_from_omega(1.0 / cfg.network.devices as f64, cfg.schedule.m)?;
            Ok(recommended_stepsize(
                task.bound_knobs().smoothness,
                cfg.training.local_steps,
                cfg.network.devices,
                cfg.training.rounds.max(1),
                q_min,
            ))
        }
    }
}

/// Run the configured experiment with the configured seed.
pub fn run(cfg: &SimConfig) -> std::result::Result<RunOutput, RunFailure> {
    run_with_seed(cfg, cfg.seed)
}

/// Run the configured experiment with an explicit seed (used for repeats).
pub fn run_with_seed(cfg: &SimConfig, seed: u64) -> std::result::Result<RunOutput, RunFailure> {
    macro_rules! try_run {
        ($records:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => return Err(RunFailure { error: err, records: $records }),
            }
        };
    }

    let fail_empty = |e: Error| RunFailure { error: e, records: Vec::new() };
    cfg.validate().map_err(|e| fail_empty(e.into()))?;

    let streams = RngStreams::new(seed);
    let mut partition_rng = streams.stream("data-partition");
    let mut channel_rng = streams.stream("channel");
    let mut sampling_rng = streams.stream("sampling");
    let mut sgd_rng = streams.stream("sgd");

    let task = build_task(&cfg.task_spec(), &mut partition_rng).map_err(fail_empty)?;
    let n = cfg.network.devices;
    let ch = cfg.channel_params(task.dim());
    ch.validate().map_err(fail_empty)?;
    let ly = cfg.lyapunov_params();
    ly.validate().map_err(fail_empty)?;
    let solver = cfg.solver_options();
    let policy = build_policy(&cfg.schedule.policy, &ly, &ch, &solver).map_err(fail_empty)?;
    let gamma = resolve_gamma(cfg, task.as_ref()).map_err(fail_empty)?;

    let rounds = cfg.training.rounds;
    let time = TimeModel { tau_comp: cfg.time.tau_comp };
    let exact_loss = task.kind() == "quadratic";
    let mut model = GlobalModel::new(task.initial_point());
    let initial_loss = task.global_loss(&model.params);
    let mut queues = VirtualQueues::new(n);
    let mut cum_time = 0.0;
    let mut pq_sum = vec![0.0; n];
    let mut selection_counts = vec![0usize; n];
    let mut records: Vec<RoundRecord> = Vec::with_capacity(rounds.min(1 << 20));

    for t in 0..rounds {
        let state = draw_channel(&ch, t, &mut channel_rng);
        let ctx = RoundContext { state: &state, queues: &queues, m: cfg.schedule.m };
        let decision = try_run!(records, policy.decide(&ctx));
        let participants = draw_participants(&decision.probs, &mut sampling_rng);
        let selected = participants.selected();

        let mut deltas = Vec::with_capacity(selected.len());
        for &dev in &selected {
            let delta = try_run!(
                records,
                local_sgd(&model, dev, task.as_ref(), gamma, cfg.training.local_steps, &mut sgd_rng)
                    .map_err(|e| Error::Run(format!("round {t}: {e}")))
            );
            deltas.push((dev, delta));
        }
        model = try_run!(records, aggregate(&model, &deltas, &participants, decision.probs.q()));
        if policy.uses_virtual_queues() {
            update_queues(&mut queues, &decision, &ly);
        }

        let mut comm_total = 0.0;
        for &dev in &selected {
            comm_total += try_run!(records, comm_time(state.gains[dev], decision.power[dev], &ch));
        }
        cum_time += time.tau_comp + comm_total;

        for (acc, (&p, &q)) in pq_sum.iter_mut().zip(decision.power.iter().zip(decision.probs.q())) {
            *acc += p * q;
        }
        for &dev in &selected {
            selection_counts[dev] += 1;
        }

        let evaluate = exact_loss || t % cfg.training.eval_every == 0 || t + 1 == rounds;
        let train_loss = if evaluate { Some(task.global_loss(&model.params)) } else { None };
        let test_accuracy = if evaluate { task.test_accuracy(&model.params) } else { None };
        if let Some(l) = train_loss {
            if !l.is_finite() {
                return Err(RunFailure {
                    error: Error::Run(format!("round {t}: global loss diverged to {l}")),
                    records,
                });
            }
        }

        let realized_power: Vec<f64> = (0..n)
            .map(|i| if participants.indicator()[i] { decision.power[i] } else { 0.0 })
            .collect();
        let running_avg_power: Vec<f64> = pq_sum.iter().map(|&s| s / (t + 1) as f64).collect();

        records.push(RoundRecord {
            t,
            selected,
            comm_time_total: comm_total,
            comp_time: time.tau_comp,
            cum_time,
            train_loss,
            test_accuracy,
            objective_value: decision.objective_value,
            solver_iters: decision.solver_iters,
            solver_converged: decision.solver_converged,
            q: decision.probs.q().to_vec(),
            power: decision.power.clone(),
            queues: queues.z().to_vec(),
            gains: state.gains,
            realized_power,
            running_avg_power,
        });
    }

    let summary = summarize(cfg, seed, task.as_ref(), gamma, initial_loss, &records, &selection_counts);
    Ok(RunOutput { records, summary })
}

fn summarize(
    cfg: &SimConfig,
    seed: u64,
    task: &dyn Task,
    gamma: f64,
    initial_loss: f64,
    records: &[RoundRecord],
    selection_counts: &[usize],
) -> RunSummary {
    let n = cfg.network.devices;
    let rounds_run = records.len();
    let last = records.last();

    let final_loss = records.iter().rev().find_map(|r| r.train_loss);
    let final_accuracy = records.iter().rev().find_map(|r| r.test_accuracy);
    let total_time = last.map(|r| r.cum_time).unwrap_or(0.0);

    let time_to_target_loss =
        cfg.output.target_loss.and_then(|t| time_to_target(records, Metric::TrainLoss, t));
    let time_to_target_accuracy =
        cfg.output.target_accuracy.and_then(|t| time_to_target(records, Metric::TestAccuracy, t));

    let selection_frequency: Vec<f64> = selection_counts
        .iter()
        .map(|&c| if rounds_run == 0 { 0.0 } else { c as f64 / rounds_run as f64 })
        .collect();
    let final_running_avg_power =
        last.map(|r| r.running_avg_power.clone()).unwrap_or_else(|| vec![0.0; n]);
    let power_budget_ratio: Vec<f64> =
        final_running_avg_power.iter().map(|&p| p / cfg.schedule.p_bar).collect();

    let solver_unconverged_rounds = records.iter().filter(|r| !r.solver_converged).count();
    let mean_solver_iters = if rounds_run == 0 {
        0.0
    } else {
        records.iter().map(|r| r.solver_iters as f64).sum::<f64>() / rounds_run as f64
    };

    let (bound, bound_note) = if rounds_run == 0 {
        (None, Some("no rounds run".to_string()))
    } else {
        let knobs = task.bound_knobs();
        let q_min_realized = records
            .iter()
            .flat_map(|r| r.q.iter().cloned())
            .fold(f64::INFINITY, f64::min)
            .clamp(f64::MIN_POSITIVE, 1.0);
        let q_history: Vec<Vec<f64>> = records.iter().map(|r| r.q.clone()).collect();
        let bp = BoundParams {
            gamma,
            local_steps: cfg.training.local_steps,
            smoothness: knobs.smoothness,
            noise_var: knobs.noise_var,
            divergence_sq: knobs.divergence_sq,
            q_min: q_min_realized,
        };
        match evaluate_bound(&bp, &q_history, initial_loss, final_loss.unwrap_or(initial_loss)) {
            Ok(rep) => (
                Some(BoundSummary {
                    c: rep.c,
                    phi1: rep.phi1,
                    phi2: rep.phi2,
                    mean_q: rep.mean_q,
                    rhs: rep.rhs,
                    stepsize_ok: rep.stepsize_ok,
                    smoothness: knobs.smoothness,
                    noise_var: knobs.noise_var,
                    divergence_sq: knobs.divergence_sq,
                    exact: knobs.exact,
                    q_min_realized,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        }
    };

    RunSummary {
        schema: "fedsched-summary-v1".to_string(),
        config_text: crate::config::write_config(cfg),
        policy: cfg.schedule.policy.clone(),
        task: cfg.task.kind.clone(),
        seed,
        devices: n,
        draws: cfg.schedule.m,
        rounds_run,
        gamma,
        initial_loss,
        final_loss,
        final_accuracy,
        total_time,
        time_to_target_loss,
        time_to_target_accuracy,
        selection_frequency,
        final_running_avg_power,
        power_budget_ratio,
        solver_unconverged_rounds,
        mean_solver_iters,
        bound,
        bound_note,
    }
}

/// Which recorded metric a target refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Crossed when the metric falls to or below the target.
    TrainLoss,
    /// Crossed when the metric rises to or meets the target.
    TestAccuracy,
}

/// Simulated time at which the recorded metric first crosses `target`;
/// `None` if it never does. A target already satisfied by the first
/// evaluated record yields that record's time.
pub fn time_to_target(records: &[RoundRecord], metric: Metric, target: f64) -> Option<f64> {
    for r in records {
        let crossed = match metric {
            Metric::TrainLoss => r.train_loss.map(|v| v <= target),
            Metric::TestAccuracy => r.test_accuracy.map(|v| v >= target),
        };
        if crossed == Some(true) {
            return Some(r.cum_time);
        }
    }
    None
}

/// Interpolate each run's `(time, value)` series onto a shared uniform
/// grid over the overlapping time range, average pointwise across runs,
/// then apply a trailing moving average of `window` grid points.
pub fn interpolate_and_average(
    runs: &[Vec<(f64, f64)>],
    grid_step: f64,
    window: usize,
) -> Result<Vec<(f64, f64)>> {
    if runs.is_empty() || runs.iter().any(|r| r.is_empty()) {
        return Err(Error::Domain("need at least one non-empty run".into()));
    }
    if !(grid_step > 0.0) {
        return Err(Error::Domain(format!("grid_step must be positive, got {grid_step}")));
    }
    if window == 0 {
        return Err(Error::Domain("window must be at least 1".into()));
    }
    let lo = runs.iter().map(|r| r[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = runs.iter().map(|r| r[r.len() - 1].0).fold(f64::INFINITY, f64::min);
    if hi < lo {
        return Err(Error::Domain(format!(
            "runs share no overlapping time range (last common start {lo}, first common end {hi})"
        )));
    }

    let eps = 1e-9 * hi.abs().max(1.0);
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let t = lo + k as f64 * grid_step;
        if t > hi + eps {
            break;
        }
        grid.push(t.min(hi));
        k += 1;
    }

    let mut averaged = vec![0.0; grid.len()];
    for run in runs {
        let mut cursor = 0usize;
        for (gi, &t) in grid.iter().enumerate() {
            while cursor + 1 < run.len() && run[cursor + 1].0 < t {
                cursor += 1;
            }
            let v = if run.len() == 1 {
                run[0].1
            } else {
                let (t0, v0) = run[cursor];
                let (t1, v1) = run[(cursor + 1).min(run.len() - 1)];
                if t1 <= t0 {
                    v0
                } else {
                    let frac = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                    v0 + frac * (v1 - v0)
                }
            };
            averaged[gi] += v / runs.len() as f64;
        }
    }

    let smoothed: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let start = i + 1 - window.min(i + 1);
            let mean = averaged[start..=i].iter().sum::<f64>() / (i - start + 1) as f64;
            (t, mean)
        })
        .collect();
    Ok(smoothed)
}

/// One configuration to sweep, with a human-readable label.
#[derive(Debug, Clone)]
pub struct SweepItem {
    pub label: String,
    pub config: SimConfig,
}

/// Outcome of one run inside a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub label: String,
    pub seed: u64,
    pub error: Option<String>,
    pub rounds_run: usize,
    pub total_time: f64,
    pub time_to_target_loss: Option<f64>,
    pub time_to_target_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub selection_frequency: Vec<f64>,
}

/// Run every item `repeats` times (seeds `seed, seed+1, ...`), at most
/// `jobs` runs concurrently. Individual failures become rows with an
/// error message; the sweep continues. Row order is deterministic
/// regardless of scheduling.
pub fn sweep(items: &[SweepItem], jobs: usize) -> Vec<SweepRow> {
    let tasks: Vec<(usize, u64)> = items
        .iter()
        .enumerate()
        .flat_map(|(i, it)| (0..it.config.repeats as u64).map(move |r| (i, r)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; tasks.len()]);
    let workers = jobs.max(1).min(tasks.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= tasks.len() {
                    break;
                }
                let (item_idx, repeat) = tasks[k];
                let item = &items[item_idx];
                let seed = item.config.seed.wrapping_add(repeat);
                let row = match run_with_seed(&item.config, seed) {
                    Ok(out) => SweepRow {
                        label: item.label.clone(),
                        seed,
                        error: None,
                        rounds_run: out.summary.rounds_run,
                        total_time: out.summary.total_time,
                        time_to_target_loss: out.summary.time_to_target_loss,
                        time_to_target_accuracy: out.summary.time_to_target_accuracy,
                        final_loss: out.summary.final_loss,
                        final_accuracy: out.summary.final_accuracy,
                        selection_frequency: out.summary.selection_frequency,
                    },
                    Err(failure) => SweepRow {
                        label: item.label.clone(),
                        seed,
                        error: Some(failure.to_string()),
                        rounds_run: failure.records.len(),
                        total_time: failure.records.last().map(|r| r.cum_time).unwrap_or(0.0),
                        time_to_target_loss: None,
                        time_to_target_accuracy: None,
                        final_loss: None,
                        final_accuracy: None,
                        selection_frequency: Vec::new(),
                    },
                };
                results.lock().expect("sweep results lock")[k] = Some(row);
            });
        }
    });

    results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every sweep task produces a row"))
        .collect()
}
