//! Dependency-free numeric kernels shared by the scheduler and channel
//! models: the Lambert W principal branch, one-dimensional bounded
//! minimization, Euclidean simplex projection, and labeled deterministic
//! RNG streams.

pub mod dist;

use rand_chacha::ChaCha12Rng;
use rand_core::SeedableRng;

use crate::error::{Error, Result};

/// Convergence tolerances shared by the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_iters: 200 }
    }
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::Domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::Domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Principal branch of the Lambert W function for `z >= 0`.
///
/// Solves `w * exp(w) = z` by Halley iteration from a log-based initial
/// guess, falling back to bisection if the iteration stalls. The result
/// satisfies `|w * exp(w) - z| <= max(abs_tol, rel_tol * z)`.
pub fn lambert_w0(z: f64, tol: &ToleranceSpec) -> Result<f64> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Domain(format!("lambert_w0 requires finite z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let target = tol.abs_tol.max(tol.rel_tol * z);

    // For large z, w ~= ln z - ln ln z; otherwise ln(1+z) is a serviceable
    // overestimate that Halley pulls in within a few steps.
    let mut w = if z > std::f64::consts::E {
        let lz = z.ln();
        lz - lz.ln()
    } else {
        z.ln_1p()
    };

    for _ in 0..tol.max_iters {
        let ew = w.exp();
        let f = w * ew - z;
        if f.abs() <= target {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let next = w - f / denom;
        if !next.is_finite() {
            break;
        }
        // w >= 0 on the principal branch for z >= 0.
        w = next.max(0.0);
    }

    bisect_w0(z, target)
}

fn bisect_w0(z: f64, target: f64) -> Result<f64> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut grow = 0;
    while hi * hi.exp() < z {
        hi *= 2.0;
        grow += 1;
        if grow > 64 {
            return Err(Error::Numeric(format!("lambert_w0 bracket failed for z = {z}")));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = mid * mid.exp() - z;
        if f.abs() <= target {
            return Ok(mid);
        }
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
///
/// Returns `(x_min, f_min)`. Derivative-free; a non-finite evaluation of
/// `f` is reported as a numeric error carrying the offending abscissa.
pub fn minimize_1d<F>(f: F, lo: f64, hi: f64, tol: &ToleranceSpec) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
        return Err(Error::Domain(format!("minimize_1d requires finite lo < hi, got [{lo}, {hi}]")));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Numeric(format!("objective evaluated to {y} at x = {x}")))
        }
    };

    // 2 - phi, the interior-point ratio of golden-section search.
    const RESP: f64 = 0.381_966_011_250_105_1;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = a + RESP * (b - a);
    let mut x2 = b - RESP * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;

    for _ in 0..tol.max_iters {
        let scale = a.abs().max(b.abs()).max(1.0);
        if (b - a) <= tol.abs_tol.max(tol.rel_tol * scale) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + RESP * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - RESP * (b - a);
            f2 = eval(x2)?;
        }
    }

    if f1 < f2 {
        Ok((x1, f1))
    } else {
        Ok((x2, f2))
    }
}

/// Euclidean projection of `v` onto the probability simplex
/// `{ w : sum(w) = 1, w >= 0 }` using the sort-based threshold algorithm.
pub fn project_to_simplex(v: &[f64]) -> Result<Vec<f64>> {
    project_to_scaled_simplex(v, 1.0)
}

/// Projection onto `{ w : sum(w) = total, w >= 0 }` for `total > 0`.
pub(crate) fn project_to_scaled_simplex(v: &[f64], total: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Domain("cannot project an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("cannot project a vector with non-finite entries".into()));
    }
    if !(total > 0.0) {
        return Err(Error::Domain(format!("simplex total must be positive, got {total}")));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (j as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// Deterministic, labeled random-number streams.
///
/// Each labeled stream is a ChaCha12 generator whose 256-bit key is derived
/// from `(seed, label)` by chaining the splitmix64 finalizer over the seed
/// and the label bytes. Identical `(seed, label)` pairs therefore produce
/// identical sequences on every platform; distinct labels or seeds produce
/// statistically independent streams.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive the stream for `label`. Any string is a valid label; streams
    /// are single-owner by convention (one stream drives one run).
    pub fn stream(&self, label: &str) -> ChaCha12Rng {
        let mut h = mix64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for &b in label.as_bytes() {
            h = mix64(h ^ u64::from(b));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            h = mix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }

    /// Derive one stream per label, rejecting duplicate labels.
    pub fn streams(&self, labels: &[&str]) -> Result<Vec<ChaCha12Rng>> {
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Config(format!("duplicate rng stream label `{a}`")));
            }
        }
        Ok(labels.iter().map(|l| self.stream(l)).collect())
    }
}

/// splitmix64 finalizer (Steele, Lea, Flood). Used only for key derivation.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
