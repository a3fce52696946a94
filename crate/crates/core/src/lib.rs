//! Deterministic simulator and library for communication-efficient device
//! scheduling in federated learning over fading wireless channels.
//!
//! The library is organized around a small set of subsystems:
//!
//! * [`numerics`] — dependency-free numeric kernels: Lambert W, golden-section
//!   minimization, simplex projection, and labeled deterministic RNG streams.
//! * [`channel`] — Rayleigh channel gain generation and the TDMA uplink
//!   communication-time model.
//! * [`sampling`] — conversions between multinomial draw probabilities and
//!   per-round marginal participation probabilities, and the m-draw
//!   sampling-with-replacement participant selection.
//! * [`scheduler`] — the drift-plus-penalty decision engine: virtual power
//!   queues, closed-form transmit power via Lambert W, and the
//!   simplex-constrained selection-probability solver.
//! * [`policy`] — the scheduling-policy trait and by-name registry
//!   (`lyapunov`, `uniform`).
//! * [`fltrain`] — the learning side: synthetic tasks, Dirichlet data
//!   partitioning, local SGD, inverse-probability-weighted aggregation, and
//!   the convergence-bound evaluator.
//! * [`sim`] — the round loop, wall-clock accounting, post-processing, and
//!   the sweep runner.
//! * [`config`] — the sectioned key-value experiment configuration.

// Validation guards are written as negated comparisons (`!(x > 0.0)`) so
// NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod fltrain;
pub mod numerics;
pub mod policy;
pub mod sampling;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
