//! Scheduling policies behind a common trait, registered by name and
//! selected at runtime from the configuration.

use crate::channel::{ChannelParams, ChannelState};
use crate::error::{Error, Result};
use crate::scheduler::{
    decide_round, uniform_policy, LyapunovParams, SchedulerDecision, SolverOptions, VirtualQueues,
};

/// Everything a policy may observe when deciding one round.
pub struct RoundContext<'a> {
    pub state: &'a ChannelState,
    pub queues: &'a VirtualQueues,
    /// Sampling-with-replacement draws this round.
    pub m: usize,
}

/// A per-round client selection and power allocation strategy.
pub trait SchedulingPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, ctx: &RoundContext<'_>) -> Result<SchedulerDecision>;
    /// Whether the simulator should advance virtual power queues with this
    /// policy's decisions.
    fn uses_virtual_queues(&self) -> bool {
        false
    }
}

/// Drift-plus-penalty scheduling: Lambert-W powers and the simplex solver.
pub struct LyapunovPolicy {
    pub params: LyapunovParams,
    pub channel: ChannelParams,
    pub solver: SolverOptions,
}

impl SchedulingPolicy for LyapunovPolicy {
    fn name(&self) -> &'static str {
        "lyapunov"
    }

    fn decide(&self, ctx: &RoundContext<'_>) -> Result<SchedulerDecision> {
        decide_round(ctx.state, ctx.queues, &self.params, &self.channel, ctx.m, &self.solver)
    }

    fn uses_virtual_queues(&self) -> bool {
        true
    }
}

/// Uniform selection with budget-saturating power, the baseline strategy.
pub struct UniformPolicy {
    pub params: LyapunovParams,
    pub channel: ChannelParams,
}

impl SchedulingPolicy for UniformPolicy {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn decide(&self, ctx: &RoundContext<'_>) -> Result<SchedulerDecision> {
        let n = ctx.state.gains.len();
        let mut decision = uniform_policy(ctx.m, n, &self.params)?;
        // Report the same drift-plus-penalty objective the scheduler would
        // see (with zero queues) so runs are comparable in the records.
        let q = decision.probs.q()[0];
        let mut objective = 0.0;
        for (i, &gain) in ctx.state.gains.iter().enumerate() {
            let snr = gain * decision.power[i] / self.channel.noise_power;
            let rate = snr.ln_1p() / std::f64::consts::LN_2;
            objective += self.params.v / (n as f64 * q)
                + self.params.v * self.params.lambda * self.channel.model_bits * q
                    / (self.channel.bandwidth * rate);
        }
        decision.objective_value = objective;
        Ok(decision)
    }
}

type PolicyBuilder =
    fn(&LyapunovParams, &ChannelParams, &SolverOptions) -> Box<dyn SchedulingPolicy>;

/// Registered policies, keyed by config name.
pub const POLICIES: &[(&str, PolicyBuilder)] = &[
    ("lyapunov", |ly, ch, solver| {
        Box::new(LyapunovPolicy { params: ly.clone(), channel: ch.clone(), solver: *solver })
    }),
    ("uniform", |ly, ch, _| Box::new(UniformPolicy { params: ly.clone(), channel: ch.clone() })),
];

/// The registry's names, in registration order.
pub const POLICY_NAMES: &[&str] = &["lyapunov", "uniform"];

/// Look up a policy by name and build it.
pub fn build_policy(
    name: &str,
    ly: &LyapunovParams,
    ch: &ChannelParams,
    solver: &SolverOptions,
) -> Result<Box<dyn SchedulingPolicy>> {
    POLICIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, build)| build(ly, ch, solver))
        .ok_or_else(|| {
            Error::Config(format!("unknown policy `{name}` (available: {})", POLICY_NAMES.join(", ")))
        })
}
