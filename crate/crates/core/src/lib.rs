//! Phase retrieval by mean-field variational Bayes EM.
//!
//! A complex signal `x` is recovered from modulus-only measurements
//! `y = |D x|` by alternating closed-form updates of a fully factorized
//! posterior: von Mises factors over the missing measurement phases and
//! circular Gaussian factors over the signal coefficients, together with
//! maximum-likelihood re-estimation of the noise and prior variances.
//!
//! The crate also ships a Gerchberg-Saxton baseline, a seeded problem
//! generator, a phase-invariant scoring metric, text file formats and a
//! Monte-Carlo experiment harness (see the `prvbem-bench` binary).

pub mod bench;
pub mod bessel;
mod error;
pub mod gs;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    CMatrix, GroundTruth, MeasurementEnsemble, ModelParams, PosteriorState, VonMisesStats,
};
pub use num_complex::Complex64;
pub use solver::{solve, InitScheme, Solution, SolverConfig};
