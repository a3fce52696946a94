//! Sweep grid files: a base configuration plus axes to expand.
//!
//! ```text
//! base = paper.cfg          # path, relative to the grid file
//!
//! [grid]
//! m = 1,5,10
//! tau_comp = 0,2,10
//! policy = lyapunov,uniform
//! ```
//!
//! Axes expand as a Cartesian product in declaration order; each cell's
//! label concatenates its `key=value` pairs. Every cell inherits the base
//! configuration's `repeats` (seeds `seed..seed+repeats-1`).

use std::path::Path;

use fedsched_core::config::{parse_config, GammaSpec, SimConfig};
use fedsched_core::sim::SweepItem;

const AXIS_KEYS: &[&str] = &["m", "tau_comp", "lambda", "v", "policy", "alpha", "gamma", "rounds", "seed"];

#[derive(Debug, Clone)]
struct Axis {
    key: String,
    values: Vec<String>,
}

fn apply_axis(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), String> {
    let bad = |what: &str| format!("axis `{key}`: cannot parse `{value}` as {what}");
    match key {
        "m" => cfg.schedule.m = value.parse().map_err(|_| bad("an unsigned integer"))?,
        "tau_comp" => cfg.time.tau_comp = value.parse().map_err(|_| bad("a number"))?,
        "lambda" => cfg.schedule.lambda = value.parse().map_err(|_| bad("a number"))?,
        "v" => cfg.schedule.v = value.parse().map_err(|_| bad("a number"))?,
        "policy" => cfg.schedule.policy = value.to_string(),
        "alpha" => {
            cfg.task.alpha = if value.eq_ignore_ascii_case("inf") {
                f64::INFINITY
            } else {
                value.parse().map_err(|_| bad("a number or `inf`"))?
            }
        }
        "gamma" => {
            cfg.training.gamma = if value.eq_ignore_ascii_case("auto") {
                GammaSpec::Auto
            } else {
                GammaSpec::Fixed(value.parse().map_err(|_| bad("a number or `auto`"))?)
            }
        }
        "rounds" => cfg.training.rounds = value.parse().map_err(|_| bad("an unsigned integer"))?,
        "seed" => cfg.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
        _ => return Err(format!("unknown axis `{key}` (available: {})", AXIS_KEYS.join(", "))),
    }
    Ok(())
}

/// Parse a grid file and expand it into labeled configurations.
pub fn load_grid(path: &Path) -> Result<Vec<SweepItem>, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut base = SimConfig::default();
    let mut axes: Vec<Axis> = Vec::new();
    let mut in_grid = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[grid]" {
            in_grid = true;
            continue;
        }
        if line.starts_with('[') {
            return Err(format!("line {lineno}: unknown section `{line}` (only [grid])").into());
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {lineno}: expected `key = value`, got `{line}`").into());
        };
        let key = key.trim();
        let value = value.trim();
        if !in_grid {
            if key == "base" {
                base = parse_config(&dir.join(value)).map_err(|e| e.to_string())?;
            } else {
                return Err(format!("line {lineno}: unknown key `{key}` before [grid] (only `base`)").into());
            }
        } else {
            if !AXIS_KEYS.contains(&key) {
                return Err(
                    format!("line {lineno}: unknown axis `{key}` (available: {})", AXIS_KEYS.join(", ")).into()
                );
            }
            let values: Vec<String> =
                value.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(format!("line {lineno}: axis `{key}` has no values").into());
            }
            axes.push(Axis { key: key.to_string(), values });
        }
    }

    let mut items = vec![SweepItem { label: String::new(), config: base }];
    for axis in &axes {
        let mut expanded = Vec::with_capacity(items.len() * axis.values.len());
        for item in &items {
            for value in &axis.values {
                let mut cfg = item.config.clone();
                apply_axis(&mut cfg, &axis.key, value)?;
                let label = if item.label.is_empty() {
                    format!("{}={}", axis.key, value)
                } else {
                    format!("{} {}={}", item.label, axis.key, value)
                };
                expanded.push(SweepItem { label, config: cfg });
            }
        }
        items = expanded;
    }
    if axes.is_empty() {
        items[0].label = "base".to_string();
    }

    for item in &items {
        item.config.validate().map_err(|e| format!("cell `{}`: {e}", item.label))?;
    }
    Ok(items)
}
