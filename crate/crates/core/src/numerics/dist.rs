//! Hand-rolled distribution transforms over a generic `RngCore` source.
//!
//! Every transform consumes a documented, fixed pattern of raw draws so
//! sequences are reproducible across platforms and releases: uniforms come
//! from the top 53 bits of `next_u64`, normals from Box-Muller (two uniforms
//! per value), gammas from Marsaglia-Tsang.

use rand_core::RngCore;

/// Uniform sample in `[0, 1)`.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Uniform sample in `(0, 1]`.
pub fn uniform_pos<R: RngCore>(rng: &mut R) -> f64 {
    1.0 - uniform(rng)
}

/// Exponential sample with the given mean, by inversion.
pub fn exponential<R: RngCore>(rng: &mut R, mean: f64) -> f64 {
    debug_assert!(mean > 0.0);
    -mean * (-uniform(rng)).ln_1p()
}

/// Standard normal sample via Box-Muller (cosine branch).
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = uniform_pos(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gamma(shape, 1) sample via Marsaglia-Tsang, with the boost trick for
/// shape < 1.
pub fn gamma<R: RngCore>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite());
    if shape < 1.0 {
        let boosted = gamma(rng, shape + 1.0);
        return boosted * uniform_pos(rng).powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_pos(rng);
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Symmetric Dirichlet sample of dimension `k` with concentration `alpha`.
///
/// `alpha = 0` is the one-hot limit (a uniformly random vertex);
/// `alpha = +inf` is the exactly uniform vector.
pub fn dirichlet<R: RngCore>(rng: &mut R, alpha: f64, k: usize) -> Vec<f64> {
    debug_assert!(k >= 1);
    if alpha == 0.0 {
        let mut v = vec![0.0; k];
        let hot = (uniform(rng) * k as f64) as usize;
        v[hot.min(k - 1)] = 1.0;
        return v;
    }
    if alpha.is_infinite() {
        return vec![1.0 / k as f64; k];
    }
    let mut v: Vec<f64> = (0..k).map(|_| gamma(rng, alpha)).collect();
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        // All gammas underflowed; degrade gracefully to a vertex.
        let hot = (uniform(rng) * k as f64) as usize;
        let mut one_hot = vec![0.0; k];
        one_hot[hot.min(k - 1)] = 1.0;
        return one_hot;
    }
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Categorical draw by inverse CDF over a prefix sum of `probs`, with the
/// tie-break fixed toward the lower index. Entries with zero probability
/// are never selected; float shortfall at the top end falls back to the
/// last positive-probability index.
pub fn categorical<R: RngCore>(rng: &mut R, probs: &[f64]) -> usize {
    debug_assert!(!probs.is_empty());
    let u = uniform(rng);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u <= acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStreams;

    #[test]
    fn uniform_in_range() {
        let mut rng = RngStreams::new(7).stream("u");
        for _ in 0..10_000 {
            let x = uniform(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn exponential_mean_matches() {
        let mut rng = RngStreams::new(8).stream("e");
        let n = 200_000;
        let mean = 3.5;
        let s: f64 = (0..n).map(|_| exponential(&mut rng, mean)).sum();
        let emp = s / n as f64;
        assert!((emp - mean).abs() < 0.05, "empirical mean {emp}");
    }

    #[test]
    fn normal_moments() {
        let mut rng = RngStreams::new(9).stream("n");
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn gamma_mean_and_variance() {
        let mut rng = RngStreams::new(10).stream("g");
        for shape in [0.3, 1.0, 2.5, 9.0] {
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| gamma(&mut rng, shape)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            assert!((mean - shape).abs() < 0.05 * shape.max(1.0), "shape {shape} mean {mean}");
            assert!((var - shape).abs() < 0.12 * shape.max(1.0), "shape {shape} var {var}");
        }
    }

    #[test]
    fn dirichlet_limits() {
        let mut rng = RngStreams::new(11).stream("d");
        let one_hot = dirichlet(&mut rng, 0.0, 5);
        assert_eq!(one_hot.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(one_hot.iter().filter(|&&x| x == 0.0).count(), 4);

        let flat = dirichlet(&mut rng, f64::INFINITY, 4);
        assert!(flat.iter().all(|&x| (x - 0.25).abs() < 1e-15));

        let v = dirichlet(&mut rng, 1.0, 6);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn categorical_respects_zero_mass_and_frequencies() {
        let mut rng = RngStreams::new(12).stream("c");
        let probs = [0.25, 0.0, 0.75];
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[categorical(&mut rng, &probs)] += 1;
        }
        assert_eq!(counts[1], 0);
        let f0 = counts[0] as f64 / n as f64;
        assert!((f0 - 0.25).abs() < 0.01, "f0 = {f0}");
    }
}
