//! Verification toolkit for lower bounds on universal 1-bit compressive
//! sensing of sparse signals with bounded dynamic range.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`]: signals, measurement matrices, sign patterns and the
//!   `b = sign(Ax)` operator (with `sign(0) = +1`).
//! - [`ensembles`]: seeded SplitMix64 streams, Gaussian and Rademacher
//!   matrix generation.
//! - [`balance`]: the `(n, l, d)`-balancing problem, witness pairs and the
//!   reduction from an unbalanced family to an invalid measurement matrix.
//! - [`validity`]: exhaustive universal-validity checking and support
//!   decoding at desk scale, plus the separation formulas of the upper bound.
//! - [`probability`]: exact, closed-form, quadrature and Monte Carlo kernels
//!   for single and joint balancing-failure events, and de Caen's bound.
//! - [`bounds`]: the `alpha`, `v_beta`, `A/B/C` machinery that assembles de
//!   Caen's bound for the union of failure events, plus threshold formulas.

pub mod balance;
pub mod bounds;
pub mod combinations;
pub mod ensembles;
mod error;
pub mod exact;
pub mod lp;
pub mod probability;
pub mod quadrature;
pub mod signal;
pub mod special;
pub mod validity;

pub use error::{Error, Result};
pub use signal::{
    confusable, sign_measure, Ensemble, MeasurementMatrix, SignPattern, SignalClassSpec,
    SparseSignal, SupportSizeMode,
};
