//! Experiment configuration: a flat, sectioned key-value text format and
//! its canonical serialization.
//!
//! ```text
//! # comment
//! seed = 42
//! repeats = 3
//!
//! [task]
//! kind = softmax
//! alpha = 1
//! ...
//! ```
//!
//! Sections are `[task]`, `[network]`, `[schedule]`, `[training]`, `[time]`
//! and `[output]`; `seed` and `repeats` live at the top level. Every key
//! has a default, so an empty file parses to the default configuration.
//! Unknown sections or keys are rejected. All parse and validation
//! problems are collected into one report with line references.

use std::fmt;
use std::path::Path;

use crate::fltrain::{QuadraticSpec, SoftmaxSpec, TaskSpec, TASK_KINDS};
use crate::scheduler::{LyapunovParams, SolverOptions};

/// One problem found while parsing or validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

/// Aggregated configuration report: every issue found, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration problem(s):", self.issues.len())?;
        for issue in &self.issues {
            match issue.line {
                Some(l) => writeln!(f, "  line {l}: {}", issue.message)?,
                None => writeln!(f, "  {}", issue.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl From<ConfigError> for crate::Error {
    fn from(e: ConfigError) -> Self {
        crate::Error::Config(e.to_string())
    }
}

/// Per-device Rayleigh scale assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    /// Linearly spaced from `lo` to `hi` across the device index.
    Linear { lo: f64, hi: f64 },
    Constant(f64),
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Linear { lo, hi } => write!(f, "linear:{lo}..{hi}"),
            SigmaSpec::Constant(v) => write!(f, "constant:{v}"),
        }
    }
}

/// Learning-rate selection: a fixed value or the schedule helper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Fixed(f64),
    /// Derive from `min(q_min/(8LK), sqrt(N q_min)/(sqrt(TK) L))` at run
    /// start, using the task's smoothness constant and the uniform-draw
    /// marginal as `q_min`.
    Auto,
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Fixed(v) => write!(f, "{v}"),
            GammaSpec::Auto => write!(f, "auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    /// `quadratic` or `softmax`.
    pub kind: String,
    /// Parameter dimension (quadratic) or feature dimension (softmax).
    pub dim: usize,
    pub classes: usize,
    pub samples_per_device: usize,
    /// Dirichlet concentration; `inf` is the i.i.d. limit.
    pub alpha: f64,
    /// Quadratic stochastic-gradient noise scale.
    pub noise_std: f64,
    pub hess_min: f64,
    pub hess_max: f64,
    pub center_spread: f64,
    pub class_sep: f64,
    pub test_samples_per_class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub devices: usize,
    pub sigma: SigmaSpec,
    pub noise_power: f64,
    pub bandwidth: f64,
    /// Uplink payload per round in bits; `None` means 32 bits per model
    /// parameter.
    pub model_bits: Option<f64>,
    pub gain_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    /// Policy registry name.
    pub policy: String,
    /// Sampling-with-replacement draws per round.
    pub m: usize,
    pub lambda: f64,
    pub v: f64,
    /// Per-device time-average power budget (broadcast to all devices).
    pub p_bar: f64,
    /// Peak power in dB; converted to watts as `10^(dB/10)`.
    pub p_max_db: f64,
    /// Lower clamp on draw probabilities; `None` means `1e-6 / devices`.
    pub omega_floor: Option<f64>,
    pub solver_max_iters: usize,
    pub solver_rel_decrease: f64,
    pub solver_grad_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub gamma: GammaSpec,
    /// Local SGD steps per selected device per round.
    pub local_steps: usize,
    pub batch_size: usize,
    /// Aggregation rounds T.
    pub rounds: usize,
    /// Softmax loss/accuracy evaluation cadence; the quadratic loss is
    /// exact and evaluated every round regardless.
    pub eval_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    /// Constant per-round parallel computation time in seconds.
    pub tau_comp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Interpolation grid step in seconds for post-processing.
    pub grid_step: f64,
    /// Trailing rolling-average window, in grid points.
    pub window: usize,
    pub target_loss: Option<f64>,
    pub target_accuracy: Option<f64>,
}

/// The full experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub repeats: usize,
    pub task: TaskConfig,
    pub network: NetworkConfig,
    pub schedule: ScheduleConfig,
    pub training: TrainingConfig,
    pub time: TimeConfig,
    pub output: OutputConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repeats: 1,
            task: TaskConfig {
                kind: "softmax".into(),
                dim: 16,
                classes: 10,
                samples_per_device: 500,
                alpha: 1.0,
                noise_std: 1.0,
                hess_min: 0.5,
                hess_max: 2.0,
                center_spread: 5.0,
                class_sep: 3.0,
                test_samples_per_class: 100,
            },
            network: NetworkConfig {
                devices: 100,
                sigma: SigmaSpec::Linear { lo: 0.1, hi: 10.0 },
                noise_power: 1.0,
                bandwidth: 22e6,
                model_bits: None,
                gain_floor: 0.001,
            },
            schedule: ScheduleConfig {
                policy: "lyapunov".into(),
                m: 10,
                lambda: 100.0,
                v: 100.0,
                p_bar: 1.0,
                p_max_db: 35.0,
                omega_floor: None,
                solver_max_iters: 500,
                solver_rel_decrease: 1e-10,
                solver_grad_tol: 1e-8,
            },
            training: TrainingConfig {
                gamma: GammaSpec::Fixed(0.01),
                local_steps: 10,
                batch_size: 32,
                rounds: 1000,
                eval_every: 10,
            },
            time: TimeConfig { tau_comp: 0.0 },
            output: OutputConfig {
                grid_step: 1.0,
                window: 20,
                target_loss: None,
                target_accuracy: None,
            },
        }
    }
}

impl SimConfig {
    /// Peak power in watts.
    pub fn p_max_linear(&self) -> f64 {
        10f64.powf(self.schedule.p_max_db / 10.0)
    }

    /// Effective draw-probability floor.
    pub fn omega_floor(&self) -> f64 {
        self.schedule.omega_floor.unwrap_or(1e-6 / self.network.devices as f64)
    }

    /// Per-device Rayleigh scales.
    pub fn sigmas(&self) -> Vec<f64> {
        let n = self.network.devices;
        match self.network.sigma {
            SigmaSpec::Constant(v) => vec![v; n],
            SigmaSpec::Linear { lo, hi } => {
                if n == 1 {
                    vec![lo]
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            }
        }
    }

    pub fn task_spec(&self) -> TaskSpec {
        match self.task.kind.as_str() {
            "quadratic" => TaskSpec::Quadratic(QuadraticSpec {
                dim: self.task.dim,
                devices: self.network.devices,
                hess_min: self.task.hess_min,
                hess_max: self.task.hess_max,
                center_spread: self.task.center_spread,
                noise_std: self.task.noise_std,
            }),
            _ => TaskSpec::Softmax(SoftmaxSpec {
                feature_dim: self.task.dim,
                classes: self.task.classes,
                devices: self.network.devices,
                samples_per_device: self.task.samples_per_device,
                alpha: self.task.alpha,
                class_sep: self.task.class_sep,
                test_samples_per_class: self.task.test_samples_per_class,
                batch_size: self.training.batch_size,
            }),
        }
    }

    pub fn lyapunov_params(&self) -> LyapunovParams {
        LyapunovParams {
            v: self.schedule.v,
            lambda: self.schedule.lambda,
            p_bar: vec![self.schedule.p_bar; self.network.devices],
            p_max: self.p_max_linear(),
        }
    }

    pub fn channel_params(&self, model_dim: usize) -> crate::channel::ChannelParams {
        crate::channel::ChannelParams {
            sigma: self.sigmas(),
            noise_power: self.network.noise_power,
            bandwidth: self.network.bandwidth,
            model_bits: self.network.model_bits.unwrap_or(32.0 * model_dim as f64),
            gain_floor: self.network.gain_floor,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            omega_floor: self.omega_floor(),
            max_iters: self.schedule.solver_max_iters,
            rel_decrease: self.schedule.solver_rel_decrease,
            grad_tol: self.schedule.solver_grad_tol,
        }
    }

    /// All semantic invariants, aggregated. `lines`, when present, maps
    /// `section.key` paths to the source line that set them.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with_lines(&Lines::default())
    }

    fn validate_with_lines(&self, lines: &Lines) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |key: &str, msg: String| {
            issues.push(ConfigIssue { line: lines.get(key), message: format!("{key}: {msg}") });
        };

        if self.repeats == 0 {
            bad("repeats", "must be at least 1".into());
        }
        if !TASK_KINDS.contains(&self.task.kind.as_str()) {
            bad("task.kind", format!("unknown task `{}` (available: {})", self.task.kind, TASK_KINDS.join(", ")));
        }
        if self.task.dim == 0 {
            bad("task.dim", "must be at least 1".into());
        }
        if self.task.classes < 2 {
            bad("task.classes", "must be at least 2".into());
        }
        if self.task.samples_per_device == 0 {
            bad("task.samples_per_device", "must be at least 1".into());
        }
        if self.task.alpha.is_nan() || self.task.alpha < 0.0 {
            bad("task.alpha", format!("must be >= 0 (or `inf`), got {}", self.task.alpha));
        }
        if self.task.noise_std < 0.0 {
            bad("task.noise_std", "must be >= 0".into());
        }
        if !(self.task.hess_min > 0.0) || self.task.hess_max < self.task.hess_min {
            bad("task.hess_min", format!("need 0 < hess_min <= hess_max, got [{}, {}]", self.task.hess_min, self.task.hess_max));
        }
        if self.task.center_spread < 0.0 {
            bad("task.center_spread", "must be >= 0".into());
        }
        if self.task.class_sep < 0.0 {
            bad("task.class_sep", "must be >= 0".into());
        }
        if self.task.test_samples_per_class == 0 {
            bad("task.test_samples_per_class", "must be at least 1".into());
        }

        if self.network.devices == 0 {
            bad("network.devices", "must be at least 1".into());
        }
        match self.network.sigma {
            SigmaSpec::Constant(v) if !(v > 0.0) => {
                bad("network.sigma", format!("sigma must be positive, got {v}"));
            }
            SigmaSpec::Linear { lo, hi } if !(lo > 0.0) || !(hi >= lo) => {
                bad("network.sigma", format!("need 0 < lo <= hi, got {lo}..{hi}"));
            }
            _ => {}
        }
        if !(self.network.noise_power > 0.0) {
            bad("network.noise_power", "must be positive".into());
        }
        if !(self.network.bandwidth > 0.0) {
            bad("network.bandwidth", "must be positive".into());
        }
        if let Some(bits) = self.network.model_bits {
            if !(bits >= 1.0) {
                bad("network.model_bits", format!("must be at least 1, got {bits}"));
            }
        }
        if !(self.network.gain_floor > 0.0) {
            bad("network.gain_floor", "must be positive".into());
        }

        if !crate::policy::POLICY_NAMES.contains(&self.schedule.policy.as_str()) {
            bad(
                "schedule.policy",
                format!("unknown policy `{}` (available: {})", self.schedule.policy, crate::policy::POLICY_NAMES.join(", ")),
            );
        }
        if self.schedule.m == 0 {
            bad("schedule.m", "must be at least 1".into());
        }
        if !(self.schedule.lambda > 0.0) {
            bad("schedule.lambda", "must be positive".into());
        }
        if !(self.schedule.v > 0.0) {
            bad("schedule.v", "must be positive".into());
        }
        if !(self.schedule.p_bar > 0.0) {
            bad("schedule.p_bar", "must be positive".into());
        }
        if !self.schedule.p_max_db.is_finite() {
            bad("schedule.p_max_db", "must be finite".into());
        } else if self.p_max_linear() < self.schedule.p_bar {
            bad("schedule.p_max_db", format!("peak power {} W is below p_bar {}", self.p_max_linear(), self.schedule.p_bar));
        }
        if let Some(floor) = self.schedule.omega_floor {
            if !(floor > 0.0) || floor * self.network.devices as f64 >= 1.0 {
                bad("schedule.omega_floor", format!("must satisfy 0 < floor * devices < 1, got {floor}"));
            }
        }
        if self.schedule.solver_max_iters == 0 {
            bad("schedule.solver_max_iters", "must be at least 1".into());
        }
        if !(self.schedule.solver_rel_decrease > 0.0) {
            bad("schedule.solver_rel_decrease", "must be positive".into());
        }
        if !(self.schedule.solver_grad_tol > 0.0) {
            bad("schedule.solver_grad_tol", "must be positive".into());
        }

        if let GammaSpec::Fixed(g) = self.training.gamma {
            if !(g > 0.0) {
                bad("training.gamma", format!("must be positive, got {g}"));
            }
        }
        if self.training.local_steps == 0 {
            bad("training.local_steps", "must be at least 1".into());
        }
        if self.training.batch_size == 0 {
            bad("training.batch_size", "must be at least 1".into());
        }
        if self.training.eval_every == 0 {
            bad("training.eval_every", "must be at least 1".into());
        }

        if !(self.time.tau_comp >= 0.0) {
            bad("time.tau_comp", "must be >= 0".into());
        }

        if !(self.output.grid_step > 0.0) {
            bad("output.grid_step", "must be positive".into());
        }
        if self.output.window == 0 {
            bad("output.window", "must be at least 1".into());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }
}

#[derive(Default)]
struct Lines {
    map: std::collections::HashMap<String, usize>,
}

impl Lines {
    fn get(&self, key: &str) -> Option<usize> {
        self.map.get(key).copied()
    }
}

/// Parse a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        issues: vec![ConfigIssue { line: None, message: format!("cannot read {}: {e}", path.display()) }],
    })?;
    parse_config_str(&text)
}

/// Parse configuration text. Defaults apply to every key not set.
pub fn parse_config_str(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg = SimConfig::default();
    let mut issues = Vec::new();
    let mut lines = Lines::default();
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            match name.strip_suffix(']') {
                Some(name) if SECTIONS.contains(&name.trim()) => {
                    section = name.trim().to_string();
                }
                Some(name) => {
                    issues.push(ConfigIssue {
                        line: Some(lineno),
                        message: format!("unknown section `[{}]` (known: {})", name.trim(), SECTIONS.join(", ")),
                    });
                    section = String::new();
                }
                None => issues.push(ConfigIssue {
                    line: Some(lineno),
                    message: format!("malformed section header `{line}`"),
                }),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(lineno),
                message: format!("expected `key = value`, got `{line}`"),
            });
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        match apply_key(&mut cfg, &section, key, value) {
            Ok(path) => {
                lines.map.insert(path, lineno);
            }
            Err(msg) => issues.push(ConfigIssue { line: Some(lineno), message: msg }),
        }
    }

    if !issues.is_empty() {
        return Err(ConfigError { issues });
    }
    cfg.validate_with_lines(&lines)?;
    Ok(cfg)
}

const SECTIONS: &[&str] = &["task", "network", "schedule", "training", "time", "output"];

fn parse_num<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
    value.parse::<T>().map_err(|_| format!("cannot parse `{value}` as {what}"))
}

fn parse_f64(value: &str) -> Result<f64, String> {
    parse_num::<f64>(value, "a number")
}

fn parse_alpha(value: &str) -> Result<f64, String> {
    if value.eq_ignore_ascii_case("inf") {
        Ok(f64::INFINITY)
    } else {
        parse_f64(value)
    }
}

fn parse_sigma(value: &str) -> Result<SigmaSpec, String> {
    if let Some(rest) = value.strip_prefix("linear:") {
        let (lo, hi) = rest
            .split_once("..")
            .ok_or_else(|| format!("sigma `linear:` wants `lo..hi`, got `{rest}`"))?;
        Ok(SigmaSpec::Linear { lo: parse_f64(lo.trim())?, hi: parse_f64(hi.trim())? })
    } else if let Some(rest) = value.strip_prefix("constant:") {
        Ok(SigmaSpec::Constant(parse_f64(rest.trim())?))
    } else {
        Err(format!("sigma must be `linear:lo..hi` or `constant:v`, got `{value}`"))
    }
}

fn parse_gamma(value: &str) -> Result<GammaSpec, String> {
    if value.eq_ignore_ascii_case("auto") {
        Ok(GammaSpec::Auto)
    } else {
        Ok(GammaSpec::Fixed(parse_f64(value)?))
    }
}

fn parse_opt_f64(value: &str, sentinel: &str) -> Result<Option<f64>, String> {
    if value.eq_ignore_ascii_case(sentinel) {
        Ok(None)
    } else {
        Ok(Some(parse_f64(value)?))
    }
}

/// Apply one `key = value` in `section`; returns the canonical key path.
fn apply_key(cfg: &mut SimConfig, section: &str, key: &str, value: &str) -> Result<String, String> {
    let path = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
    match (section, key) {
        ("", "seed") => cfg.seed = parse_num::<u64>(value, "an unsigned integer")?,
        ("", "repeats") => cfg.repeats = parse_num::<usize>(value, "an unsigned integer")?,
        ("", _) => return Err(format!("unknown top-level key `{key}` (expected seed or repeats)")),

        ("task", "kind") => cfg.task.kind = value.to_string(),
        ("task", "dim") => cfg.task.dim = parse_num(value, "an unsigned integer")?,
        ("task", "classes") => cfg.task.classes = parse_num(value, "an unsigned integer")?,
        ("task", "samples_per_device") => cfg.task.samples_per_device = parse_num(value, "an unsigned integer")?,
        ("task", "alpha") => cfg.task.alpha = parse_alpha(value)?,
        ("task", "noise_std") => cfg.task.noise_std = parse_f64(value)?,
        ("task", "hess_min") => cfg.task.hess_min = parse_f64(value)?,
        ("task", "hess_max") => cfg.task.hess_max = parse_f64(value)?,
        ("task", "center_spread") => cfg.task.center_spread = parse_f64(value)?,
        ("task", "class_sep") => cfg.task.class_sep = parse_f64(value)?,
        ("task", "test_samples_per_class") => cfg.task.test_samples_per_class = parse_num(value, "an unsigned integer")?,

        ("network", "devices") => cfg.network.devices = parse_num(value, "an unsigned integer")?,
        ("network", "sigma") => cfg.network.sigma = parse_sigma(value)?,
        ("network", "noise_power") => cfg.network.noise_power = parse_f64(value)?,
        ("network", "bandwidth") => cfg.network.bandwidth = parse_f64(value)?,
        ("network", "model_bits") => cfg.network.model_bits = parse_opt_f64(value, "auto")?,
        ("network", "gain_floor") => cfg.network.gain_floor = parse_f64(value)?,

        ("schedule", "policy") => cfg.schedule.policy = value.to_string(),
        ("schedule", "m") => cfg.schedule.m = parse_num(value, "an unsigned integer")?,
        ("schedule", "lambda") => cfg.schedule.lambda = parse_f64(value)?,
        ("schedule", "v") => cfg.schedule.v = parse_f64(value)?,
        ("schedule", "p_bar") => cfg.schedule.p_bar = parse_f64(value)?,
        ("schedule", "p_max_db") => cfg.schedule.p_max_db = parse_f64(value)?,
        ("schedule", "omega_floor") => cfg.schedule.omega_floor = parse_opt_f64(value, "auto")?,
        ("schedule", "solver_max_iters") => cfg.schedule.solver_max_iters = parse_num(value, "an unsigned integer")?,
        ("schedule", "solver_rel_decrease") => cfg.schedule.solver_rel_decrease = parse_f64(value)?,
        ("schedule", "solver_grad_tol") => cfg.schedule.solver_grad_tol = parse_f64(value)?,

        ("training", "gamma") => cfg.training.gamma = parse_gamma(value)?,
        ("training", "local_steps") => cfg.training.local_steps = parse_num(value, "an unsigned integer")?,
        ("training", "batch_size") => cfg.training.batch_size = parse_num(value, "an unsigned integer")?,
        ("training", "rounds") => cfg.training.rounds = parse_num(value, "an unsigned integer")?,
        ("training", "eval_every") => cfg.training.eval_every = parse_num(value, "an unsigned integer")?,

        ("time", "tau_comp") => cfg.time.tau_comp = parse_f64(value)?,

        ("output", "grid_step") => cfg.output.grid_step = parse_f64(value)?,
        ("output", "window") => cfg.output.window = parse_num(value, "an unsigned integer")?,
        ("output", "target_loss") => cfg.output.target_loss = parse_opt_f64(value, "none")?,
        ("output", "target_accuracy") => cfg.output.target_accuracy = parse_opt_f64(value, "none")?,

        (s, k) => return Err(format!("unknown key `{k}` in section [{s}]")),
    }
    Ok(path)
}

/// Canonical serialization: every key, fixed order, shortest round-trip
/// float formatting. `parse_config_str(write_config(c)) == c` for every
/// valid configuration.
pub fn write_config(cfg: &SimConfig) -> String {
    let mut s = String::new();
    use std::fmt::Write;

    writeln!(s, "seed = {}", cfg.seed).unwrap();
    writeln!(s, "repeats = {}", cfg.repeats).unwrap();

    writeln!(s, "\n[task]").unwrap();
    writeln!(s, "kind = {}", cfg.task.kind).unwrap();
    writeln!(s, "dim = {}", cfg.task.dim).unwrap();
    writeln!(s, "classes = {}", cfg.task.classes).unwrap();
    writeln!(s, "samples_per_device = {}", cfg.task.samples_per_device).unwrap();
    if cfg.task.alpha.is_infinite() {
        writeln!(s, "alpha = inf").unwrap();
    } else {
        writeln!(s, "alpha = {}", cfg.task.alpha).unwrap();
    }
    writeln!(s, "noise_std = {}", cfg.task.noise_std).unwrap();
    writeln!(s, "hess_min = {}", cfg.task.hess_min).unwrap();
    writeln!(s, "hess_max = {}", cfg.task.hess_max).unwrap();
    writeln!(s, "center_spread = {}", cfg.task.center_spread).unwrap();
    writeln!(s, "class_sep = {}", cfg.task.class_sep).unwrap();
    writeln!(s, "test_samples_per_class = {}", cfg.task.test_samples_per_class).unwrap();

    writeln!(s, "\n[network]").unwrap();
    writeln!(s, "devices = {}", cfg.network.devices).unwrap();
    writeln!(s, "sigma = {}", cfg.network.sigma).unwrap();
    writeln!(s, "noise_power = {}", cfg.network.noise_power).unwrap();
    writeln!(s, "bandwidth = {}", cfg.network.bandwidth).unwrap();
    match cfg.network.model_bits {
        Some(b) => writeln!(s, "model_bits = {b}").unwrap(),
        None => writeln!(s, "model_bits = auto").unwrap(),
    }
    writeln!(s, "gain_floor = {}", cfg.network.gain_floor).unwrap();

    writeln!(s, "\n[schedule]").unwrap();
    writeln!(s, "policy = {}", cfg.schedule.policy).unwrap();
    writeln!(s, "m = {}", cfg.schedule.m).unwrap();
    writeln!(s, "lambda = {}", cfg.schedule.lambda).unwrap();
    writeln!(s, "v = {}", cfg.schedule.v).unwrap();
    writeln!(s, "p_bar = {}", cfg.schedule.p_bar).unwrap();
    writeln!(s, "p_max_db = {}", cfg.schedule.p_max_db).unwrap();
    match cfg.schedule.omega_floor {
        Some(f) => writeln!(s, "omega_floor = {f}").unwrap(),
        None => writeln!(s, "omega_floor = auto").unwrap(),
    }
    writeln!(s, "solver_max_iters = {}", cfg.schedule.solver_max_iters).unwrap();
    writeln!(s, "solver_rel_decrease = {}", cfg.schedule.solver_rel_decrease).unwrap();
    writeln!(s, "solver_grad_tol = {}", cfg.schedule.solver_grad_tol).unwrap();

    writeln!(s, "\n[training]").unwrap();
    writeln!(s, "gamma = {}", cfg.training.gamma).unwrap();
    writeln!(s, "local_steps = {}", cfg.training.local_steps).unwrap();
    writeln!(s, "batch_size = {}", cfg.training.batch_size).unwrap();
    writeln!(s, "rounds = {}", cfg.training.rounds).unwrap();
    writeln!(s, "eval_every = {}", cfg.training.eval_every).unwrap();

    writeln!(s, "\n[time]").unwrap();
    writeln!(s, "tau_comp = {}", cfg.time.tau_comp).unwrap();

    writeln!(s, "\n[output]").unwrap();
    writeln!(s, "grid_step = {}", cfg.output.grid_step).unwrap();
    writeln!(s, "window = {}", cfg.output.window).unwrap();
    match cfg.output.target_loss {
        Some(t) => writeln!(s, "target_loss = {t}").unwrap(),
        None => writeln!(s, "target_loss = none").unwrap(),
    }
    match cfg.output.target_accuracy {
        Some(t) => writeln!(s, "target_accuracy = {t}").unwrap(),
        None => writeln!(s, "target_accuracy = none").unwrap(),
    }
    s
}
