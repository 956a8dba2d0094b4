//! Gaussian and discrete noise stability.
//!
//! * [`gauss`]: exchangeable Gaussian covariance, sampling, normal CDF and
//!   orthant probabilities.
//! * [`partitions`]: q-cell partitions of Gaussian space (half-space stacks,
//!   standard simplex partitions, box unions) and defuzzification.
//! * [`stability`]: noise-stability estimators and the exchangeable-Gaussian
//!   and simplex-partition property checkers.
//! * [`fourier`]: functions on `[q]^n` as multilinear polynomials, noise
//!   operator, influences, maximal correlation, invariance gaps.
//! * [`social_choice`]: Condorcet voting, cosmic coin flipping, plurality.
//! * [`maxqcut`]: MAX-q-CUT relaxation, simplex rounding, the `α_q`
//!   constant, and the unique-label-cover reduction.

pub mod error;
pub mod estimate;
pub mod fourier;
pub mod gauss;
pub mod maxqcut;
pub mod partitions;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod social_choice;
pub mod stability;

pub use error::{Error, Result};
pub use estimate::{Method, StabilityEstimate};
pub use rng::{derive_seed, stream, McConfig, SeededStream};
