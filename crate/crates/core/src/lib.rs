//! Differentially private count tables through fixed-point count mechanisms.
//!
//! A two-stage pipeline first releases a noisy estimate `z` of the count
//! distribution, then builds a transition matrix `T` that satisfies
//! `epsilon`-differential privacy between neighboring counts and keeps `z`
//! fixed (`z T = z`). Each count is replaced by a draw from its row of `T`.

pub mod baselines;
pub mod constructors;
pub mod counts;
pub mod error;
pub mod linalg;
pub mod membership;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod privatize;
pub mod rng;
pub mod scalar;
pub mod scales;
pub mod simplex;

pub use error::{Error, Result};
