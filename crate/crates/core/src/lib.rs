//! Numerical core for studying surrogate-risk consistency when noisy labels
//! are aggregated before training.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function of
//! its inputs; randomness enters only through the counter-keyed [`rng::Stream`].
//!
//! Module map:
//!
//! - [`task`]: label spaces, finite distributions, scores, decoders, task losses.
//! - [`aggregate`]: majority vote, ranking frequency aggregation, KNN voting.
//! - [`surrogate`]: surrogate losses, subgradients, identifiability certificates.
//! - [`calibration`]: noise statistics, calibration curves, comparison inequalities.
//! - [`optimize`]: deterministic gradient / subgradient minimization.
//! - [`scenarios`]: the synthetic constructions (ranking cycle, binary
//!   near-orthogonal mixture, corrupted multiclass link, matching noise).
//! - [`lp`]: a small dense simplex used for exact piecewise-linear infima.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aggregate;
pub mod calibration;
pub mod error;
pub mod lp;
pub mod math;
pub mod optimize;
pub mod rng;
pub mod scenarios;
pub mod surrogate;
pub mod task;

pub use error::{Error, Result};
