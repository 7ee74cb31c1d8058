//! Stability and performance analysis for remote state estimation with a
//! smart sensor over a finite-state Markov fading channel.
//!
//! The crate is organised bottom-up:
//!
//! - [`matrix`]: a small dense row-major matrix type with the handful of
//!   decompositions the rest of the crate needs (spectral radius by the
//!   Gelfand limit, Perron root, rank, linear solves, null vectors).
//! - [`lti`]: the plant/sensor model, the steady-state Kalman filter, the
//!   open-loop holding map `v(X) = A X Aᵀ + W` and the error trace `c(i)`.
//! - [`channel`]: the Markov channel, its stationary distribution, the
//!   post-success state set and the finite-blocklength dropout mapping.
//! - [`cycle`]: the stability test `ρ²(A) ρ(DM) < 1`, the estimation-cycle
//!   model and the analytic average MSE, plus stability-region scans.
//! - [`sim`]: Monte Carlo simulation of the full loop, smart and
//!   conventional sensors.
//! - [`bounds`]: numerical checks of the matrix-power envelopes that the
//!   stability proof relies on.
//!
//! All transition matrices are row-stochastic (`P[i][j]` is the probability
//! of moving from state `i` to state `j`) and `D` scales rows, so `DM` is
//! `diag(d) · P`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod cycle;
pub mod lti;
pub mod matrix;
pub mod numfmt;
pub mod sim;

mod error;

pub use error::Error;

/// Values of `c(i)` above this are treated as saturated.
pub const SATURATION_LIMIT: f64 = 1e250;
