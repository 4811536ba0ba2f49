//! Certified-robust federated adversarial learning at desk scale.
//!
//! This crate trains smoothed classifiers with adversarial examples generated
//! against the smoothed model, inside a simulated synchronous federated
//! averaging loop, and certifies the ℓ₂ robustness of the result by
//! Monte-Carlo randomized smoothing.
//!
//! The pieces compose bottom-up:
//!
//! - [`nn`] — a dense feed-forward soft classifier with exact parameter and
//!   input gradients, plain SGD, and a binary checkpoint format.
//! - [`smoothing`] — Monte-Carlo evaluation of the Gaussian-smoothed
//!   classifier: prediction with abstention, certification with
//!   Clopper–Pearson lower bounds, and the certified-radius formula.
//! - [`attack`] — ℓ₂-projected gradient ascent against the smoothed
//!   classifier, with a backprop-based stochastic gradient estimator and a
//!   forward-only one-point estimator.
//! - [`federation`] — heterogeneous data partitioning, client sampling,
//!   local adversarial training, and weighted parameter aggregation,
//!   simulated in-process.
//! - [`data`] — an IDX image loader and a synthetic Gaussian-blobs generator,
//!   both producing `[0,1]`-normalized feature vectors.
//!
//! All randomness flows through [`rng::StreamFactory`], which derives
//! independent substreams from a single seed so that serial and parallel
//! execution produce bit-identical results.

pub mod attack;
pub mod data;
pub mod error;
pub mod federation;
pub mod matrix;
pub mod nn;
pub mod parallel;
pub mod rng;
pub mod smoothing;

pub use error::{Error, Result};
pub use matrix::Matrix;

#[cfg(test)]
pub(crate) mod testutil;
