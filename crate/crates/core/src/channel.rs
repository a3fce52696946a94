//! Rayleigh channel gain generation and the TDMA uplink communication-time
//! model.
//!
//! A device with Rayleigh amplitude scale `sigma` has squared gain `|h|^2`
//! distributed exponentially with mean `2 * sigma^2`; gains are clamped
//! below at a configurable floor to keep transmission times finite on deep
//! fades. Selected devices transmit sequentially (TDMA), each at capacity,
//! so uplink time for one device is `l / (B * log2(1 + |h|^2 * P / N0))`.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::dist;

/// Static parameters of the wireless uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Per-device Rayleigh scale sigma_n.
    pub sigma: Vec<f64>,
    /// Noise power N0 (watts, normalized).
    pub noise_power: f64,
    /// Bandwidth B in Hz.
    pub bandwidth: f64,
    /// Model size in bits.
    pub model_bits: f64,
    /// Lower clamp applied to each squared gain.
    pub gain_floor: f64,
}

impl ChannelParams {
    pub fn devices(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_empty() {
            return Err(Error::Config("channel needs at least one device".into()));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("every sigma must be positive and finite".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::Config(format!("noise_power must be positive, got {}", self.noise_power)));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if !(self.model_bits >= 1.0) {
            return Err(Error::Config(format!("model_bits must be at least 1, got {}", self.model_bits)));
        }
        if !(self.gain_floor > 0.0) {
            return Err(Error::Config(format!("gain_floor must be positive, got {}", self.gain_floor)));
        }
        Ok(())
    }
}

/// Realized squared gains `|h_n|^2` for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub round: usize,
    pub gains: Vec<f64>,
}

/// Draw one round of squared gains: exponential with mean `2 sigma_n^2`,
/// clamped below at the gain floor; i.i.d. across rounds and devices.
pub fn draw_channel(params: &ChannelParams, round: usize, rng: &mut ChaCha12Rng) -> ChannelState {
    let gains = params
        .sigma
        .iter()
        .map(|&s| dist::exponential(rng, 2.0 * s * s).max(params.gain_floor))
        .collect();
    ChannelState { round, gains }
}

/// Uplink time in seconds for one device transmitting its update at
/// capacity: `l / (B * log2(1 + gain * power / N0))`. Zero power means the
/// device cannot transmit, reported as `+inf`.
pub fn comm_time(gain: f64, power: f64, params: &ChannelParams) -> Result<f64> {
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::Domain(format!("comm_time requires gain > 0, got {gain}")));
    }
    if power < 0.0 || !power.is_finite() {
        return Err(Error::Domain(format!("comm_time requires power >= 0, got {power}")));
    }
    if power == 0.0 {
        return Ok(f64::INFINITY);
    }
    let snr = gain * power / params.noise_power;
    let rate = snr.ln_1p() / std::f64::consts::LN_2;
    Ok(params.model_bits / (params.bandwidth * rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStreams;

    fn params(sigma: Vec<f64>) -> ChannelParams {
        ChannelParams {
            sigma,
            noise_power: 1.0,
            bandwidth: 22e6,
            model_bits: 32.0 * 555_178.0,
            gain_floor: 0.001,
        }
    }

    #[test]
    fn squared_gain_mean_is_two_sigma_squared() {
        let p = params(vec![1.0]);
        let mut rng = RngStreams::new(3).stream("channel");
        let n = 1_000_000;
        let mut sum = 0.0;
        for t in 0..n {
            sum += draw_channel(&p, t, &mut rng).gains[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "empirical mean {mean}");
    }

    #[test]
    fn gains_respect_floor() {
        // sigma small enough that unclamped draws frequently fall below the floor
        let p = params(vec![0.01]);
        let mut rng = RngStreams::new(4).stream("channel");
        let mut floored = 0;
        for t in 0..20_000 {
            let g = draw_channel(&p, t, &mut rng).gains[0];
            assert!(g >= 0.001);
            if g == 0.001 {
                floored += 1;
            }
        }
        // Pr[exp(mean 2e-4) < 1e-3] = 1 - exp(-5) ~ 0.9933
        let frac = floored as f64 / 20_000.0;
        assert!((frac - 0.9933).abs() < 0.01, "floored fraction {frac}");
    }

    #[test]
    fn linear_sigma_spread_orders_empirical_means() {
        let n_dev = 100;
        let sigma: Vec<f64> = (0..n_dev)
            .map(|i| 0.1 + (10.0 - 0.1) * i as f64 / (n_dev - 1) as f64)
            .collect();
        let p = params(sigma);
        let mut rng = RngStreams::new(5).stream("channel");
        // Adjacent devices differ by ~2% in mean; 200k draws per device put
        // the per-pair ordering many standard errors clear of noise.
        let rounds = 200_000;
        let mut sums = vec![0.0; n_dev];
        for t in 0..rounds {
            let st = draw_channel(&p, t, &mut rng);
            for (s, g) in sums.iter_mut().zip(st.gains.iter()) {
                *s += g;
            }
        }
        for w in sums.windows(2) {
            assert!(w[0] <= w[1], "means not nondecreasing: {} > {}", w[0], w[1]);
        }
    }

    #[test]
    fn draw_is_deterministic_per_seed() {
        let p = params(vec![0.5, 2.0, 7.0]);
        let mut a = RngStreams::new(9).stream("channel");
        let mut b = RngStreams::new(9).stream("channel");
        for t in 0..50 {
            assert_eq!(draw_channel(&p, t, &mut a), draw_channel(&p, t, &mut b));
        }
    }

    #[test]
    fn comm_time_reference_points() {
        let mut p = params(vec![1.0]);
        p.model_bits = p.bandwidth; // l = B, snr = 1 -> 1 second
        assert!((comm_time(1.0, 1.0, &p).unwrap() - 1.0).abs() < 1e-12);

        p.model_bits = 2.0 * p.bandwidth; // l = 2B, snr = 3 -> 1 second
        assert!((comm_time(3.0, 1.0, &p).unwrap() - 1.0).abs() < 1e-12);

        let p = params(vec![1.0]); // l = 32 * 555178, B = 22e6, snr = 1
        let t = comm_time(1.0, 1.0, &p).unwrap();
        let expected = 17_765_696.0 / 22_000_000.0;
        assert!((t - expected).abs() < 1e-9, "t = {t}");
        assert!((t - 0.8075).abs() < 1e-4);
    }

    #[test]
    fn comm_time_edge_cases() {
        let p = params(vec![1.0]);
        assert_eq!(comm_time(1.0, 0.0, &p).unwrap(), f64::INFINITY);
        assert!(comm_time(1.0, -1.0, &p).is_err());
        assert!(comm_time(0.0, 1.0, &p).is_err());
    }

    #[test]
    fn comm_time_strictly_decreasing_in_power_and_gain() {
        let p = params(vec![1.0]);
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let t = comm_time(1.0, k as f64 * 0.5, &p).unwrap();
            assert!(t < prev);
            prev = t;
        }
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let t = comm_time(k as f64 * 0.1, 2.0, &p).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }
}
