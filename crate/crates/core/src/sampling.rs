//! Sampling-with-replacement participant selection.
//!
//! The aggregator performs `m` categorical draws per round with draw
//! probabilities `omega_n` (summing to one). A device participates if it is
//! drawn at least once, so its marginal participation probability is
//! `q = 1 - (1 - omega)^m`. Duplicate draws collapse: a device transmits a
//! single update per round regardless of multiplicity.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::dist;

/// Marginal participation probability for a device with draw probability
/// `omega` under `m` draws with replacement: `1 - (1 - omega)^m`, computed
/// through `ln_1p`/`exp_m1` so small `omega` keeps full precision.
pub fn q_from_omega(omega: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&omega) || !omega.is_finite() {
        return Err(Error::Domain(format!("omega must lie in [0, 1], got {omega}")));
    }
    if m == 0 {
        return Err(Error::Domain("draw count m must be at least 1".into()));
    }
    Ok(q_from_omega_unchecked(omega, m))
}

pub(crate) fn q_from_omega_unchecked(omega: f64, m: usize) -> f64 {
    if omega >= 1.0 {
        return 1.0;
    }
    -(m as f64 * (-omega).ln_1p()).exp_m1()
}

/// Inverse of [`q_from_omega`]: the draw probability that yields marginal
/// `q` under `m` draws, `1 - (1 - q)^(1/m)`.
pub fn omega_from_q(q: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !q.is_finite() {
        return Err(Error::Domain(format!("q must lie in [0, 1], got {q}")));
    }
    if m == 0 {
        return Err(Error::Domain("draw count m must be at least 1".into()));
    }
    if q >= 1.0 {
        return Ok(1.0);
    }
    Ok(-((-q).ln_1p() / m as f64).exp_m1())
}

/// Per-round selection probabilities: the multinomial draw vector `omega`,
/// the draw count `m`, and the derived marginals `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProbs {
    omega: Vec<f64>,
    m: usize,
    q: Vec<f64>,
}

impl SelectionProbs {
    /// Validates `omega` (entries in [0, 1], summing to one within 1e-9)
    /// and derives the marginals.
    pub fn new(omega: Vec<f64>, m: usize) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Domain("omega must be non-empty".into()));
        }
        if m == 0 {
            return Err(Error::Domain("draw count m must be at least 1".into()));
        }
        for &w in &omega {
            if !(0.0..=1.0).contains(&w) || !w.is_finite() {
                return Err(Error::Domain(format!("omega entry {w} outside [0, 1]")));
            }
        }
        let sum: f64 = omega.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("omega must sum to 1 within 1e-9, got {sum}")));
        }
        let q = omega.iter().map(|&w| q_from_omega_unchecked(w, m)).collect();
        Ok(Self { omega, m, q })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Outcome of the `m` draws for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSet {
    indicator: Vec<bool>,
    draw_log: Vec<usize>,
}

impl ParticipantSet {
    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    /// Raw outcome of each of the `m` draws, in draw order.
    pub fn draw_log(&self) -> &[usize] {
        &self.draw_log
    }

    /// Distinct selected device indices, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.indicator
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|&&s| s).count()
    }

    /// Full participation over `n` devices (every indicator set); used by
    /// full-participation test modes.
    pub fn all(n: usize) -> Self {
        Self { indicator: vec![true; n], draw_log: (0..n).collect() }
    }

    /// Build a set from explicit draw outcomes over `n` devices, applying
    /// the same duplicate-collapse semantics as the live draw path.
    pub fn from_draws(n: usize, draws: &[usize]) -> crate::error::Result<Self> {
        let mut indicator = vec![false; n];
        for &d in draws {
            if d >= n {
                return Err(crate::error::Error::Domain(format!(
                    "draw outcome {d} out of range for {n} devices"
                )));
            }
            indicator[d] = true;
        }
        Ok(Self { indicator, draw_log: draws.to_vec() })
    }
}

/// Perform the round's `m` categorical draws and collapse duplicates into
/// a binary participation indicator.
pub fn draw_participants(probs: &SelectionProbs, rng: &mut ChaCha12Rng) -> ParticipantSet {
    let mut indicator = vec![false; probs.len()];
    let mut draw_log = Vec::with_capacity(probs.m());
    for _ in 0..probs.m() {
        let pick = dist::categorical(rng, probs.omega());
        indicator[pick] = true;
        draw_log.push(pick);
    }
    ParticipantSet { indicator, draw_log }
}

/// Whether `1 - (1 - 1/n)^m >= (min(m, n) / n) * (1 - 1/e)` — the coverage
/// guarantee for uniform sampling with replacement that underpins the
/// linear-speedup rate.
pub fn replacement_coverage_bound(n: usize, m: usize) -> bool {
    debug_assert!(n >= 1 && m >= 1);
    let lhs = q_from_omega_unchecked(1.0 / n as f64, m);
    let rhs = (m.min(n) as f64 / n as f64) * (-(-1.0f64).exp_m1());
    lhs >= rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStreams;
    use proptest::prelude::*;

    #[test]
    fn q_from_omega_reference_values() {
        assert_eq!(q_from_omega(0.0, 5).unwrap(), 0.0);
        assert_eq!(q_from_omega(1.0, 3).unwrap(), 1.0);
        let q = q_from_omega(0.01, 10).unwrap();
        assert!((q - 0.0956179).abs() < 1e-7, "q = {q}");
        // direct power form agrees
        assert!((q - (1.0 - 0.99f64.powi(10))).abs() < 1e-15);
    }

    #[test]
    fn omega_from_q_endpoints() {
        assert_eq!(omega_from_q(0.0, 4).unwrap(), 0.0);
        assert_eq!(omega_from_q(1.0, 4).unwrap(), 1.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(q_from_omega(-0.1, 1).is_err());
        assert!(q_from_omega(1.1, 1).is_err());
        assert!(q_from_omega(0.5, 0).is_err());
        assert!(omega_from_q(f64::NAN, 1).is_err());
    }

    proptest! {
        #[test]
        fn q_omega_round_trip(omega in 0.0f64..1.0, m in 1usize..50) {
            let q = q_from_omega(omega, m).unwrap();
            // Once q is within ~1e-4 of 1 the marginal's floating-point
            // representation no longer carries omega to 1e-12; restrict the
            // round-trip contract to the representable regime.
            prop_assume!(q <= 1.0 - 1e-4);
            let back = omega_from_q(q, m).unwrap();
            prop_assert!((back - omega).abs() <= 1e-12, "omega {omega} -> q {q} -> {back}");
        }

        #[test]
        fn q_monotone_in_omega_and_m(omega in 0.0f64..0.999, m in 1usize..40) {
            let q = q_from_omega(omega, m).unwrap();
            let q_next_omega = q_from_omega((omega + 1e-3).min(1.0), m).unwrap();
            let q_next_m = q_from_omega(omega, m + 1).unwrap();
            prop_assert!(q_next_omega >= q);
            prop_assert!(q_next_m >= q);
        }
    }

    #[test]
    fn round_trip_example() {
        let q = q_from_omega(0.37, 7).unwrap();
        let back = omega_from_q(q, 7).unwrap();
        assert!((back - 0.37).abs() < 1e-12);
    }

    #[test]
    fn single_draw_selects_exactly_one() {
        let probs = SelectionProbs::new(vec![0.25; 4], 1).unwrap();
        let mut rng = RngStreams::new(21).stream("sampling");
        for _ in 0..200 {
            let set = draw_participants(&probs, &mut rng);
            assert_eq!(set.count(), 1);
            assert_eq!(set.draw_log().len(), 1);
        }
    }

    #[test]
    fn one_hot_omega_always_selects_that_device() {
        let probs = SelectionProbs::new(vec![0.0, 1.0, 0.0], 6).unwrap();
        let mut rng = RngStreams::new(22).stream("sampling");
        for _ in 0..100 {
            let set = draw_participants(&probs, &mut rng);
            assert_eq!(set.selected(), vec![1]);
        }
    }

    #[test]
    fn participant_count_bounds_hold() {
        let omega = vec![0.5, 0.2, 0.2, 0.05, 0.05];
        for m in [1usize, 2, 3, 8] {
            let probs = SelectionProbs::new(omega.clone(), m).unwrap();
            let mut rng = RngStreams::new(m as u64).stream("sampling");
            for _ in 0..500 {
                let set = draw_participants(&probs, &mut rng);
                let c = set.count();
                assert!(c >= 1 && c <= m.min(omega.len()));
            }
        }
    }

    #[test]
    fn empirical_marginals_match_q() {
        let omega = vec![0.4, 0.3, 0.15, 0.1, 0.05];
        let m = 3;
        let probs = SelectionProbs::new(omega, m).unwrap();
        let mut rng = RngStreams::new(77).stream("sampling");
        let rounds = 100_000;
        let mut counts = vec![0usize; probs.len()];
        for _ in 0..rounds {
            let set = draw_participants(&probs, &mut rng);
            for (c, &s) in counts.iter_mut().zip(set.indicator()) {
                if s {
                    *c += 1;
                }
            }
        }
        for (n, (&c, &q)) in counts.iter().zip(probs.q()).enumerate() {
            let freq = c as f64 / rounds as f64;
            assert!((freq - q).abs() < 0.005, "device {n}: freq {freq} vs q {q}");
        }
    }

    #[test]
    fn selection_probs_rejects_bad_vectors() {
        assert!(SelectionProbs::new(vec![], 1).is_err());
        assert!(SelectionProbs::new(vec![0.6, 0.6], 1).is_err());
        assert!(SelectionProbs::new(vec![1.2, -0.2], 1).is_err());
        assert!(SelectionProbs::new(vec![0.5, 0.5], 0).is_err());
    }

    #[test]
    fn coverage_bound_reference_cases() {
        // n = 1: lhs is exactly 1
        assert!(replacement_coverage_bound(1, 1));
        assert!(replacement_coverage_bound(1, 17));
        // n = 100, m = 10: 0.0956 >= 0.1 * 0.6321
        assert!(replacement_coverage_bound(100, 10));
    }

    #[test]
    fn coverage_bound_exhaustive_grid() {
        for n in 1..=200 {
            for m in 1..=400 {
                assert!(replacement_coverage_bound(n, m), "failed at n = {n}, m = {m}");
            }
        }
    }
}
