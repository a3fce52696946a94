//! CSV writers and readers for the binary's outputs.
//!
//! The per-round file starts with a one-line schema comment, then a header
//! row, then one row per round. Floats carry 17 significant digits so the
//! text round-trips the underlying doubles exactly; identical runs produce
//! byte-identical files.

use std::path::Path;

use fedsched_core::sim::{Metric, RoundRecord, SweepRow};

pub const ROUNDS_SCHEMA: &str = "fedsched-rounds-v1";

/// 17-significant-digit scientific formatting (round-trip exact for f64).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Render the per-round records; `n` fixes the per-device column count.
pub fn rounds_csv(records: &[RoundRecord], n: usize) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {ROUNDS_SCHEMA} devices={n}\n"));

    let mut header: Vec<String> = vec![
        "t".into(),
        "n_selected".into(),
        "selected".into(),
        "comm_time_total".into(),
        "comp_time".into(),
        "cum_time".into(),
        "train_loss".into(),
        "test_accuracy".into(),
        "objective_value".into(),
        "solver_iters".into(),
        "solver_converged".into(),
    ];
    for prefix in ["q", "power", "queue", "gain", "realized_power", "avg_power"] {
        for i in 0..n {
            header.push(format!("{prefix}_{i}"));
        }
    }
    s.push_str(&header.join(","));
    s.push('\n');

    for r in records {
        let mut row: Vec<String> = vec![
            r.t.to_string(),
            r.selected.len().to_string(),
            r.selected.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";"),
            fmt_f64(r.comm_time_total),
            fmt_f64(r.comp_time),
            fmt_f64(r.cum_time),
            fmt_opt(r.train_loss),
            fmt_opt(r.test_accuracy),
            fmt_f64(r.objective_value),
            r.solver_iters.to_string(),
            r.solver_converged.to_string(),
        ];
        for field in [&r.q, &r.power, &r.queues, &r.gains, &r.realized_power, &r.running_avg_power] {
            row.extend(field.iter().map(|&x| fmt_f64(x)));
        }
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Read `(cum_time, metric)` pairs back from a per-round CSV, skipping
/// rounds without an evaluation.
pub fn read_series(path: &Path, metric: Metric) -> Result<Vec<(f64, f64)>, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let schema = lines.next().unwrap_or_default();
    if !schema.starts_with(&format!("# {ROUNDS_SCHEMA}")) {
        return Err(format!("{}: not a {ROUNDS_SCHEMA} file", path.display()).into());
    }
    let header = lines.next().ok_or_else(|| format!("{}: missing header", path.display()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| format!("{}: missing column `{name}`", path.display()))
    };
    let time_idx = find("cum_time")?;
    let value_idx = match metric {
        Metric::TrainLoss => find("train_loss")?,
        Metric::TestAccuracy => find("test_accuracy")?,
    };

    let mut series = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let value = fields.get(value_idx).copied().unwrap_or_default();
        if value.is_empty() {
            continue;
        }
        let t: f64 = fields
            .get(time_idx)
            .copied()
            .unwrap_or_default()
            .parse()
            .map_err(|_| format!("{}: bad cum_time on data row {}", path.display(), lineno + 1))?;
        let v: f64 = value
            .parse()
            .map_err(|_| format!("{}: bad metric value on data row {}", path.display(), lineno + 1))?;
        series.push((t, v));
    }
    Ok(series)
}

/// Averaged and smoothed series output.
pub fn series_csv(series: &[(f64, f64)], metric: Metric) -> String {
    let name = match metric {
        Metric::TrainLoss => "train_loss",
        Metric::TestAccuracy => "test_accuracy",
    };
    let mut s = format!("# fedsched-series-v1 metric={name}\ntime,{name}\n");
    for (t, v) in series {
        s.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    s
}

/// One row per sweep run.
pub fn sweep_runs_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "# fedsched-sweep-runs-v1\nlabel,seed,error,rounds_run,total_time,time_to_target_loss,time_to_target_accuracy,final_loss,final_accuracy\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.seed,
            r.error.clone().unwrap_or_default().replace(',', ";"),
            r.rounds_run,
            fmt_f64(r.total_time),
            fmt_opt(r.time_to_target_loss),
            fmt_opt(r.time_to_target_accuracy),
            fmt_opt(r.final_loss),
            fmt_opt(r.final_accuracy),
        ));
    }
    s
}

/// Aggregated view of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub label: String,
    pub runs: usize,
    pub errors: usize,
    /// How many runs crossed the loss / accuracy targets.
    pub crossed_loss: usize,
    pub crossed_accuracy: usize,
    pub mean_time_to_target_loss: Option<f64>,
    pub mean_time_to_target_accuracy: Option<f64>,
    pub mean_final_loss: Option<f64>,
    pub mean_final_accuracy: Option<f64>,
    pub mean_total_time: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn aggregate_rows(rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.label == label).collect();
            SweepAggregate {
                label: label.to_string(),
                runs: group.len(),
                errors: group.iter().filter(|r| r.error.is_some()).count(),
                crossed_loss: group.iter().filter(|r| r.time_to_target_loss.is_some()).count(),
                crossed_accuracy: group.iter().filter(|r| r.time_to_target_accuracy.is_some()).count(),
                mean_time_to_target_loss: mean_of(group.iter().filter_map(|r| r.time_to_target_loss)),
                mean_time_to_target_accuracy: mean_of(group.iter().filter_map(|r| r.time_to_target_accuracy)),
                mean_final_loss: mean_of(group.iter().filter_map(|r| r.final_loss)),
                mean_final_accuracy: mean_of(group.iter().filter_map(|r| r.final_accuracy)),
                mean_total_time: mean_of(group.iter().map(|r| r.total_time)).unwrap_or(0.0),
            }
        })
        .collect()
}

/// One row per sweep cell, fields averaged over its runs.
pub fn sweep_summary_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "# fedsched-sweep-summary-v1\nlabel,runs,errors,crossed_loss,crossed_accuracy,mean_time_to_target_loss,mean_time_to_target_accuracy,mean_final_loss,mean_final_accuracy,mean_total_time\n",
    );
    for a in aggregate_rows(rows) {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            a.label,
            a.runs,
            a.errors,
            a.crossed_loss,
            a.crossed_accuracy,
            fmt_opt(a.mean_time_to_target_loss),
            fmt_opt(a.mean_time_to_target_accuracy),
            fmt_opt(a.mean_final_loss),
            fmt_opt(a.mean_final_accuracy),
            fmt_f64(a.mean_total_time),
        ));
    }
    s
}
