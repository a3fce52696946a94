//! Softmax classification on synthetic Gaussian class clusters.
//!
//! Class `c` has a mean vector at distance `class_sep` from the origin;
//! each sample is its class mean plus unit Gaussian noise. Device label
//! lists come from the Dirichlet partition, so `alpha` controls how
//! non-i.i.d. the devices are. The model is multinomial logistic
//! regression: parameters are a `classes x feature_dim` weight matrix plus
//! per-class biases, flattened as `[W row-major, b]`.

use rand_chacha::ChaCha12Rng;

use super::{dirichlet_partition, BoundKnobs, SoftmaxSpec, Task};
use crate::error::{Error, Result};
use crate::numerics::dist;

#[derive(Debug, Clone)]
pub struct SoftmaxTask {
    classes: usize,
    feat: usize,
    batch_size: usize,
    /// Per device: samples flattened row-major, `samples * feat`.
    features: Vec<Vec<f64>>,
    labels: Vec<Vec<usize>>,
    test_features: Vec<f64>,
    test_labels: Vec<usize>,
    knobs: BoundKnobs,
}

impl SoftmaxTask {
    pub fn build(spec: &SoftmaxSpec, rng: &mut ChaCha12Rng) -> Result<Self> {
        if spec.classes < 2 {
            return Err(Error::Config("softmax task needs at least 2 classes".into()));
        }
        if spec.feature_dim == 0 || spec.devices == 0 || spec.samples_per_device == 0 {
            return Err(Error::Config(
                "softmax task needs feature_dim, devices, samples_per_device >= 1".into(),
            ));
        }
        if spec.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(spec.class_sep >= 0.0) {
            return Err(Error::Config(format!("class_sep must be >= 0, got {}", spec.class_sep)));
        }

        // Class means: random directions scaled to class_sep.
        let means: Vec<Vec<f64>> = (0..spec.classes)
            .map(|_| {
                let g: Vec<f64> = (0..spec.feature_dim).map(|_| dist::standard_normal(rng)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                g.iter().map(|v| spec.class_sep * v / norm).collect()
            })
            .collect();

        let partition =
            dirichlet_partition(spec.alpha, spec.classes, spec.samples_per_device, spec.devices, rng)?;

        let mut features = Vec::with_capacity(spec.devices);
        for labels in &partition {
            let mut flat = Vec::with_capacity(labels.len() * spec.feature_dim);
            for &label in labels {
                for &mu in &means[label] {
                    flat.push(mu + dist::standard_normal(rng));
                }
            }
            features.push(flat);
        }

        let mut test_features = Vec::with_capacity(spec.classes * spec.test_samples_per_class * spec.feature_dim);
        let mut test_labels = Vec::with_capacity(spec.classes * spec.test_samples_per_class);
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..spec.test_samples_per_class {
                for &mu in mean {
                    test_features.push(mu + dist::standard_normal(rng));
                }
                test_labels.push(c);
            }
        }

        let mut task = Self {
            classes: spec.classes,
            feat: spec.feature_dim,
            batch_size: spec.batch_size,
            features,
            labels: partition,
            test_features,
            test_labels,
            knobs: BoundKnobs { smoothness: 1.0, noise_var: 0.0, divergence_sq: 0.0, exact: false },
        };
        task.knobs = task.estimate_knobs();
        Ok(task)
    }

    fn samples(&self, device: usize) -> usize {
        self.labels[device].len()
    }

    fn feature(&self, device: usize, sample: usize) -> &[f64] {
        let start = sample * self.feat;
        &self.features[device][start..start + self.feat]
    }

    fn logits(&self, x: &[f64], feature: &[f64], out: &mut [f64]) {
        for c in 0..self.classes {
            let row = &x[c * self.feat..(c + 1) * self.feat];
            let bias = x[self.classes * self.feat + c];
            out[c] = bias + row.iter().zip(feature.iter()).map(|(w, f)| w * f).sum::<f64>();
        }
    }

    /// Cross-entropy of one sample and, if `grad` is provided, its gradient
    /// accumulated with weight `weight`.
    fn sample_loss_grad(
        &self,
        x: &[f64],
        feature: &[f64],
        label: usize,
        mut grad: Option<(&mut [f64], f64)>,
        logits: &mut [f64],
    ) -> f64 {
        self.logits(x, feature, logits);
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for l in logits.iter() {
            denom += (l - max).exp();
        }
        let log_denom = denom.ln() + max;
        let loss = log_denom - logits[label];
        if let Some((g, weight)) = grad.as_mut() {
            for c in 0..self.classes {
                let p = (logits[c] - log_denom).exp();
                let coeff = *weight * (p - if c == label { 1.0 } else { 0.0 });
                let row = &mut g[c * self.feat..(c + 1) * self.feat];
                for (gw, f) in row.iter_mut().zip(feature.iter()) {
                    *gw += coeff * f;
                }
                g[self.classes * self.feat + c] += coeff;
            }
        }
        loss
    }

    /// Sampled constants for bound reporting: smoothness from the largest
    /// per-device mean squared feature norm, gradient noise and divergence
    /// probed at the initial point. Estimates, not certified bounds.
    fn estimate_knobs(&self) -> BoundKnobs {
        let x = self.initial_point();
        let mut logits = vec![0.0; self.classes];

        let mut max_feat_sq: f64 = 0.0;
        for dev in 0..self.devices() {
            let mut mean_sq = 0.0;
            for s in 0..self.samples(dev) {
                let f = self.feature(dev, s);
                mean_sq += f.iter().map(|v| v * v).sum::<f64>() + 1.0;
            }
            mean_sq /= self.samples(dev) as f64;
            max_feat_sq = max_feat_sq.max(mean_sq);
        }
        let smoothness = 0.5 * max_feat_sq;

        // Gradient divergence at the initial point.
        let dim = self.dim();
        let mut device_grads: Vec<Vec<f64>> = Vec::with_capacity(self.devices());
        let mut mean_grad = vec![0.0; dim];
        for dev in 0..self.devices() {
            let g = self.device_grad(dev, &x);
            for (m, v) in mean_grad.iter_mut().zip(g.iter()) {
                *m += v / self.devices() as f64;
            }
            device_grads.push(g);
        }
        let divergence_sq = device_grads
            .iter()
            .map(|g| g.iter().zip(mean_grad.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(0.0f64, f64::max);

        // Minibatch noise at the initial point: per-sample gradient
        // variance divided by the batch size, maximized over devices.
        let mut noise_var: f64 = 0.0;
        for (dev, full) in device_grads.iter().enumerate() {
            let mut var = 0.0;
            let mut g = vec![0.0; dim];
            for s in 0..self.samples(dev) {
                g.iter_mut().for_each(|v| *v = 0.0);
                self.sample_loss_grad(&x, self.feature(dev, s), self.labels[dev][s], Some((&mut g, 1.0)), &mut logits);
                var += g
                    .iter()
                    .zip(full.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            var /= self.samples(dev) as f64;
            noise_var = noise_var.max(var / self.batch_size as f64);
        }

        BoundKnobs { smoothness, noise_var, divergence_sq, exact: false }
    }
}

impl Task for SoftmaxTask {
    fn kind(&self) -> &'static str {
        "softmax"
    }

    fn dim(&self) -> usize {
        self.classes * self.feat + self.classes
    }

    fn devices(&self) -> usize {
        self.labels.len()
    }

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn global_loss(&self, x: &[f64]) -> f64 {
        (0..self.devices()).map(|n| self.device_loss(n, x)).sum::<f64>() / self.devices() as f64
    }

    fn device_loss(&self, device: usize, x: &[f64]) -> f64 {
        let mut logits = vec![0.0; self.classes];
        let mut total = 0.0;
        for s in 0..self.samples(device) {
            total += self.sample_loss_grad(x, self.feature(device, s), self.labels[device][s], None, &mut logits);
        }
        total / self.samples(device) as f64
    }

    fn device_grad(&self, device: usize, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.classes];
        let w = 1.0 / self.samples(device) as f64;
        for s in 0..self.samples(device) {
            self.sample_loss_grad(x, self.feature(device, s), self.labels[device][s], Some((&mut g, w)), &mut logits);
        }
        g
    }

    fn device_stochastic_grad(&self, device: usize, x: &[f64], rng: &mut ChaCha12Rng) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        let mut logits = vec![0.0; self.classes];
        let w = 1.0 / self.batch_size as f64;
        let n = self.samples(device);
        for _ in 0..self.batch_size {
            let s = (dist::uniform(rng) * n as f64) as usize;
            let s = s.min(n - 1);
            self.sample_loss_grad(x, self.feature(device, s), self.labels[device][s], Some((&mut g, w)), &mut logits);
        }
        g
    }

    fn test_accuracy(&self, x: &[f64]) -> Option<f64> {
        let mut logits = vec![0.0; self.classes];
        let mut correct = 0usize;
        let total = self.test_labels.len();
        for (i, &label) in self.test_labels.iter().enumerate() {
            let f = &self.test_features[i * self.feat..(i + 1) * self.feat];
            self.logits(x, f, &mut logits);
            let argmax = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                .map(|(c, _)| c)
                .unwrap_or(0);
            if argmax == label {
                correct += 1;
            }
        }
        Some(correct as f64 / total as f64)
    }

    fn bound_knobs(&self) -> BoundKnobs {
        self.knobs
    }
}
