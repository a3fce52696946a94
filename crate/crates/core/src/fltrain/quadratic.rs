//! Quadratic task with a shared diagonal Hessian and per-device centers:
//! `f_n(x) = 1/2 (x - c_n)' H (x - c_n)`.
//!
//! Sharing `H` across devices makes the heterogeneity bound exact:
//! `grad f_n(y) - grad f(y) = H (c_bar - c_n)` is constant in `y`, so
//! epsilon^2 is `max_n ||H (c_bar - c_n)||^2` at every point. The
//! smoothness constant is the largest Hessian entry and stochastic
//! gradients add zero-mean Gaussian noise of total variance `noise_std^2`.

use rand_chacha::ChaCha12Rng;

use super::{BoundKnobs, QuadraticSpec, Task};
use crate::error::{Error, Result};
use crate::numerics::dist;

#[derive(Debug, Clone)]
pub struct QuadraticTask {
    hess: Vec<f64>,
    centers: Vec<Vec<f64>>,
    noise_std: f64,
    knobs: BoundKnobs,
}

impl QuadraticTask {
    pub fn build(spec: &QuadraticSpec, rng: &mut ChaCha12Rng) -> Result<Self> {
        if spec.dim == 0 || spec.devices == 0 {
            return Err(Error::Config("quadratic task needs dim >= 1 and devices >= 1".into()));
        }
        if !(spec.hess_min > 0.0) || !(spec.hess_max >= spec.hess_min) {
            return Err(Error::Config(format!(
                "hessian range must satisfy 0 < hess_min <= hess_max, got [{}, {}]",
                spec.hess_min, spec.hess_max
            )));
        }
        if spec.center_spread < 0.0 || spec.noise_std < 0.0 {
            return Err(Error::Config("center_spread and noise_std must be >= 0".into()));
        }

        let hess: Vec<f64> = (0..spec.dim)
            .map(|_| spec.hess_min + (spec.hess_max - spec.hess_min) * dist::uniform(rng))
            .collect();
        let scale = spec.center_spread / (spec.dim as f64).sqrt();
        let centers: Vec<Vec<f64>> = (0..spec.devices)
            .map(|_| (0..spec.dim).map(|_| scale * dist::standard_normal(rng)).collect())
            .collect();

        let mut mean_center = vec![0.0; spec.dim];
        for c in &centers {
            for (m, v) in mean_center.iter_mut().zip(c.iter()) {
                *m += v / spec.devices as f64;
            }
        }
        let divergence_sq = centers
            .iter()
            .map(|c| {
                c.iter()
                    .zip(mean_center.iter())
                    .zip(hess.iter())
                    .map(|((&cj, &mj), &h)| (h * (mj - cj)).powi(2))
                    .sum::<f64>()
            })
            .fold(0.0f64, f64::max);
        let smoothness = hess.iter().cloned().fold(0.0f64, f64::max);

        Ok(Self {
            hess,
            centers,
            noise_std: spec.noise_std,
            knobs: BoundKnobs {
                smoothness,
                noise_var: spec.noise_std * spec.noise_std,
                divergence_sq,
                exact: true,
            },
        })
    }

    pub fn center(&self, device: usize) -> &[f64] {
        &self.centers[device]
    }

    /// Minimizer of the average objective; with a shared Hessian this is
    /// the mean center.
    pub fn optimum(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.hess.len()];
        for c in &self.centers {
            for (m, v) in mean.iter_mut().zip(c.iter()) {
                *m += v / self.centers.len() as f64;
            }
        }
        mean
    }
}

impl Task for QuadraticTask {
    fn kind(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.hess.len()
    }

    fn devices(&self) -> usize {
        self.centers.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn global_loss(&self, x: &[f64]) -> f64 {
        (0..self.devices()).map(|n| self.device_loss(n, x)).sum::<f64>() / self.devices() as f64
    }

    fn device_loss(&self, device: usize, x: &[f64]) -> f64 {
        let c = &self.centers[device];
        0.5 * x
            .iter()
            .zip(c.iter())
            .zip(self.hess.iter())
            .map(|((&xj, &cj), &h)| h * (xj - cj) * (xj - cj))
            .sum::<f64>()
    }

    fn device_grad(&self, device: usize, x: &[f64]) -> Vec<f64> {
        let c = &self.centers[device];
        x.iter()
            .zip(c.iter())
            .zip(self.hess.iter())
            .map(|((&xj, &cj), &h)| h * (xj - cj))
            .collect()
    }

    fn device_stochastic_grad(&self, device: usize, x: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
        let mut g = self.device_grad(device, x);
        if self.noise_std > 0.0 {
            let per_coord = self.noise_std / (self.dim() as f64).sqrt();
            for gj in &mut g {
                *gj += per_coord * dist::standard_normal(rng);
            }
        }
        g
    }

    fn test_accuracy(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    fn bound_knobs(&self) -> BoundKnobs {
        self.knobs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fltrain::{local_sgd, GlobalModel};
    use crate::numerics::RngStreams;

    fn spec() -> QuadraticSpec {
        QuadraticSpec {
            dim: 6,
            devices: 4,
            hess_min: 0.5,
            hess_max: 2.0,
            center_spread: 3.0,
            noise_std: 0.0,
        }
    }

    #[test]
    fn one_exact_step_matches_closed_form() {
        let mut rng = RngStreams::new(11).stream("data-partition");
        let task = QuadraticTask::build(&spec(), &mut rng).unwrap();
        let x = GlobalModel::new(vec![1.0; task.dim()]);
        let gamma = 0.05;
        let mut sgd = RngStreams::new(11).stream("sgd");
        let delta = local_sgd(&x, 2, &task, gamma, 1, &mut sgd).unwrap();
        let grad = task.device_grad(2, &x.params);
        for (d, g) in delta.iter().zip(grad.iter()) {
            assert!((d + gamma * g).abs() < 1e-14, "delta {d} vs -gamma*grad {}", -gamma * g);
        }
    }

    #[test]
    fn stationary_center_gives_zero_delta() {
        let mut rng = RngStreams::new(12).stream("data-partition");
        let task = QuadraticTask::build(&spec(), &mut rng).unwrap();
        let x = GlobalModel::new(task.center(1).to_vec());
        let mut sgd = RngStreams::new(12).stream("sgd");
        for k in [1usize, 3, 10] {
            let delta = local_sgd(&x, 1, &task, 0.1, k, &mut sgd).unwrap();
            assert!(delta.iter().all(|&d| d.abs() < 1e-15), "k = {k}: {delta:?}");
        }
    }

    #[test]
    fn noise_variance_matches_spec() {
        let mut rng = RngStreams::new(13).stream("data-partition");
        let mut s = spec();
        s.noise_std = 2.0;
        let task = QuadraticTask::build(&s, &mut rng).unwrap();
        let x = task.center(0).to_vec(); // exact gradient zero here
        let mut sgd = RngStreams::new(13).stream("sgd");
        let n = 50_000;
        let mut total = 0.0;
        for _ in 0..n {
            let g = task.device_stochastic_grad(0, &x, &mut sgd);
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        let emp = total / n as f64;
        assert!((emp - 4.0).abs() < 0.1, "E||g||^2 = {emp}, expected 4");
    }

    #[test]
    fn loss_nonincreasing_under_exact_full_gradient_descent() {
        let mut rng = RngStreams::new(14).stream("data-partition");
        let task = QuadraticTask::build(&spec(), &mut rng).unwrap();
        let l = task.bound_knobs().smoothness;
        let gamma = 0.9 / l;
        let mut x = task.initial_point();
        let mut prev = task.global_loss(&x);
        for _ in 0..50 {
            let mut g = vec![0.0; task.dim()];
            for n in 0..task.devices() {
                for (gj, d) in g.iter_mut().zip(task.device_grad(n, &x)) {
                    *gj += d / task.devices() as f64;
                }
            }
            for (xj, gj) in x.iter_mut().zip(g.iter()) {
                *xj -= gamma * gj;
            }
            let cur = task.global_loss(&x);
            assert!(cur <= prev + 1e-12, "loss increased: {prev} -> {cur}");
            prev = cur;
        }
        // converges toward the analytic optimum
        let opt_loss = task.global_loss(&task.optimum());
        assert!(prev - opt_loss < 1e-3);
    }

    #[test]
    fn divergence_bound_is_exact_for_shared_hessian() {
        let mut rng = RngStreams::new(15).stream("data-partition");
        let task = QuadraticTask::build(&spec(), &mut rng).unwrap();
        let eps2 = task.bound_knobs().divergence_sq;
        // max_n ||grad f_n(y) - grad f(y)||^2 is the same at any y
        for probe in [vec![0.0; task.dim()], vec![3.7; task.dim()]] {
            let mut mean_grad = vec![0.0; task.dim()];
            for n in 0..task.devices() {
                for (m, g) in mean_grad.iter_mut().zip(task.device_grad(n, &probe)) {
                    *m += g / task.devices() as f64;
                }
            }
            let max_div = (0..task.devices())
                .map(|n| {
                    task.device_grad(n, &probe)
                        .iter()
                        .zip(mean_grad.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .fold(0.0f64, f64::max);
            assert!((max_div - eps2).abs() < 1e-10 * eps2.max(1.0), "{max_div} vs {eps2}");
        }
    }
}
