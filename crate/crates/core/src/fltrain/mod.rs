//! The learning side of the simulator: synthetic tasks, Dirichlet
//! non-i.i.d. data partitioning, local SGD, inverse-probability-weighted
//! aggregation, and the convergence-bound evaluator.
//!
//! Each round, every selected device starts from the broadcast global model,
//! runs `K` minibatch-SGD steps on its own data, and ships back the
//! parameter delta. The server adds `(1/N) * sum_n (1_n / q_n) * delta_n`,
//! which keeps the expected update equal to the full-participation update
//! for any participation probabilities bounded away from zero.

mod quadratic;
mod softmax;

pub use quadratic::QuadraticTask;
pub use softmax::SoftmaxTask;

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::dist;
use crate::sampling::ParticipantSet;

/// The global model iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub params: Vec<f64>,
    pub round: usize,
}

impl GlobalModel {
    pub fn new(params: Vec<f64>) -> Self {
        Self { params, round: 0 }
    }
}

/// Smoothness / noise / heterogeneity constants a task exposes for bound
/// evaluation. `exact` distinguishes analytically known values (quadratic
/// task) from sampled estimates (softmax task).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundKnobs {
    /// Smoothness constant L.
    pub smoothness: f64,
    /// Stochastic gradient noise bound nu^2.
    pub noise_var: f64,
    /// Gradient divergence bound epsilon^2.
    pub divergence_sq: f64,
    pub exact: bool,
}

/// A federated training task over `N` devices with a common parameter
/// vector. Implementations are deterministic given their construction RNG;
/// per-call randomness comes only from the supplied SGD stream.
pub trait Task: Send + Sync {
    fn kind(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn devices(&self) -> usize;
    fn initial_point(&self) -> Vec<f64>;
    /// Average of the device objectives at `x`.
    fn global_loss(&self, x: &[f64]) -> f64;
    fn device_loss(&self, device: usize, x: &[f64]) -> f64;
    /// Exact (full-batch) device gradient.
    fn device_grad(&self, device: usize, x: &[f64]) -> Vec<f64>;
    /// Unbiased stochastic device gradient.
    fn device_stochastic_grad(&self, device: usize, x: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64>;
    /// Held-out accuracy for classification tasks; `None` otherwise.
    fn test_accuracy(&self, x: &[f64]) -> Option<f64>;
    fn bound_knobs(&self) -> BoundKnobs;
}

/// Construction parameters for the quadratic task
/// `f_n(x) = 1/2 (x - c_n)' H (x - c_n)` with a shared diagonal Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub dim: usize,
    pub devices: usize,
    /// Range of the shared diagonal Hessian entries.
    pub hess_min: f64,
    pub hess_max: f64,
    /// Scale of the per-device center offsets (controls heterogeneity).
    pub center_spread: f64,
    /// Stochastic gradient noise scale: E||g - grad||^2 = noise_std^2.
    pub noise_std: f64,
}

/// Construction parameters for softmax classification on synthetic
/// Gaussian class clusters with Dirichlet-partitioned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxSpec {
    pub feature_dim: usize,
    pub classes: usize,
    pub devices: usize,
    pub samples_per_device: usize,
    /// Dirichlet concentration; 0 is the one-class-per-device limit,
    /// +inf the i.i.d. limit.
    pub alpha: f64,
    /// Distance of class means from the origin.
    pub class_sep: f64,
    pub test_samples_per_class: usize,
    pub batch_size: usize,
}

/// Task family selector, mirroring the config's `kind` names.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Quadratic(QuadraticSpec),
    Softmax(SoftmaxSpec),
}

/// Registered task kinds, in config order.
pub const TASK_KINDS: &[&str] = &["quadratic", "softmax"];

/// Build a task from its spec, consuming the data-partition stream.
pub fn build_task(spec: &TaskSpec, rng: &mut ChaCha12Rng) -> Result<Box<dyn Task>> {
    match spec {
        TaskSpec::Quadratic(q) => Ok(Box::new(QuadraticTask::build(q, rng)?)),
        TaskSpec::Softmax(s) => Ok(Box::new(SoftmaxTask::build(s, rng)?)),
    }
}

/// Assign `samples_per_device` class labels to each of `n_devices` devices:
/// per device, draw class proportions from a symmetric Dirichlet with
/// concentration `alpha`, then draw each sample's class from the resulting
/// categorical distribution. Samples may repeat across devices.
///
/// `alpha = 0` collapses each device onto a single uniformly chosen class;
/// `alpha = +inf` gives every device exactly uniform proportions.
pub fn dirichlet_partition(
    alpha: f64,
    classes: usize,
    samples_per_device: usize,
    n_devices: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Vec<usize>>> {
    if classes < 2 {
        return Err(Error::Domain(format!("partition needs at least 2 classes, got {classes}")));
    }
    if alpha < 0.0 || alpha.is_nan() {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut out = Vec::with_capacity(n_devices);
    for _ in 0..n_devices {
        let proportions = dist::dirichlet(rng, alpha, classes);
        let labels = (0..samples_per_device).map(|_| dist::categorical(rng, &proportions)).collect();
        out.push(labels);
    }
    Ok(out)
}

/// Run `k` local SGD steps from the broadcast model on one device's data
/// and return the parameter delta `y_k - y_0`.
pub fn local_sgd(
    model: &GlobalModel,
    device: usize,
    task: &dyn Task,
    gamma: f64,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("learning rate must be positive, got {gamma}")));
    }
    let mut y = model.params.clone();
    for _ in 0..k {
        let g = task.device_stochastic_grad(device, &y, rng);
        for (yj, gj) in y.iter_mut().zip(g.iter()) {
            *yj -= gamma * gj;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Run(format!("local model diverged on device {device}")));
        }
    }
    Ok(y.iter().zip(model.params.iter()).map(|(a, b)| a - b).collect())
}

/// Inverse-probability-weighted global update:
/// `x' = x + (1/N) * sum over selected of delta_n / q_n`.
///
/// `deltas` holds `(device, delta)` pairs for exactly the distinct selected
/// devices; summation runs in ascending device order for determinism.
pub fn aggregate(
    model: &GlobalModel,
    deltas: &[(usize, Vec<f64>)],
    participants: &ParticipantSet,
    q: &[f64],
) -> Result<GlobalModel> {
    let n = q.len();
    let selected = participants.selected();
    if deltas.len() != selected.len() {
        return Err(Error::Inconsistency(format!(
            "{} deltas supplied for {} selected devices",
            deltas.len(),
            selected.len()
        )));
    }
    let mut sorted: Vec<&(usize, Vec<f64>)> = deltas.iter().collect();
    sorted.sort_by_key(|(d, _)| *d);
    let mut next = vec![0.0; model.params.len()];
    next.copy_from_slice(&model.params);
    for (&dev, (owner, delta)) in selected.iter().zip(sorted.iter()) {
        if dev != *owner {
            return Err(Error::Inconsistency(format!(
                "selected device {dev} has no delta (got one for {owner})"
            )));
        }
        if delta.len() != model.params.len() {
            return Err(Error::Inconsistency(format!(
                "delta length {} does not match model dimension {}",
                delta.len(),
                model.params.len()
            )));
        }
        let weight = 1.0 / (n as f64 * q[dev]);
        for (x, d) in next.iter_mut().zip(delta.iter()) {
            *x += weight * d;
        }
    }
    Ok(GlobalModel { params: next, round: model.round + 1 })
}

/// Inputs to the convergence-bound evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub gamma: f64,
    /// Local SGD steps per round (K).
    pub local_steps: usize,
    pub smoothness: f64,
    pub noise_var: f64,
    pub divergence_sq: f64,
    /// Assumed minimum participation probability.
    pub q_min: f64,
}

/// Components of the stationarity bound
/// `2 (f0 - fT) / (c γ K T) + Φ1 + (Φ2 / (T N)) Σ_t Q_t`,
/// with `c = 1 - 30 γ² K² L²`, `Φ1 = 5 γ² K L² (ν² + 6 K ε²) / c`,
/// `Φ2 = 2 L γ ν² / c`, and `Q_t = (1/N) Σ_n 1 / q_n^t`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundReport {
    pub c: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// Q_t per round.
    pub q_round: Vec<f64>,
    pub mean_q: f64,
    pub rhs: f64,
    /// Whether the step size satisfies `gamma <= q_min / (8 L K)`.
    pub stepsize_ok: bool,
}

/// Evaluate the bound components for a finished run. A step size violating
/// the bound's condition is reported through `stepsize_ok`, not an error;
/// `c <= 0` (step size too large for the bound to mean anything) is an
/// error.
pub fn evaluate_bound(
    bp: &BoundParams,
    q_history: &[Vec<f64>],
    f0: f64,
    f_final: f64,
) -> Result<BoundReport> {
    if q_history.is_empty() {
        return Err(Error::Domain("bound evaluation needs at least one round of q values".into()));
    }
    if !(bp.gamma > 0.0) || bp.local_steps == 0 || !(bp.smoothness > 0.0) {
        return Err(Error::Domain("bound parameters require gamma > 0, K >= 1, L > 0".into()));
    }
    if !(bp.q_min > 0.0 && bp.q_min <= 1.0) {
        return Err(Error::Domain(format!("q_min must lie in (0, 1], got {}", bp.q_min)));
    }
    let t = q_history.len() as f64;
    let n = q_history[0].len() as f64;
    let k = bp.local_steps as f64;
    let l = bp.smoothness;
    let gamma = bp.gamma;

    let c = 1.0 - 30.0 * gamma * gamma * k * k * l * l;
    if c <= 0.0 {
        return Err(Error::Config(format!(
            "step size too large for the bound: c = 1 - 30 (γKL)² = {c} <= 0"
        )));
    }
    let phi1 = 5.0 * gamma * gamma * k * l * l * (bp.noise_var + 6.0 * k * bp.divergence_sq) / c;
    let phi2 = 2.0 * l * gamma * bp.noise_var / c;

    let q_round: Vec<f64> = q_history
        .iter()
        .map(|qs| qs.iter().map(|&q| 1.0 / q).sum::<f64>() / qs.len() as f64)
        .collect();
    let sum_q: f64 = q_round.iter().sum();
    let mean_q = sum_q / t;
    let rhs = 2.0 * (f0 - f_final) / (c * gamma * k * t) + phi1 + phi2 / (t * n) * sum_q;
    let stepsize_ok = gamma <= bp.q_min / (8.0 * l * k);

    Ok(BoundReport { c, phi1, phi2, q_round, mean_q, rhs, stepsize_ok })
}

/// The step-size schedule `min(q_min / (8LK), sqrt(N q_min) / (sqrt(TK) L))`
/// that balances the bound's terms.
pub fn recommended_stepsize(l: f64, k: usize, n: usize, t: usize, q_min: f64) -> f64 {
    let kf = k as f64;
    let first = q_min / (8.0 * l * kf);
    let second = (n as f64 * q_min).sqrt() / ((t as f64 * kf).sqrt() * l);
    first.min(second)
}
