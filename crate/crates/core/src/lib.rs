//! Exact desk-scale computations for score-based discrete diffusion on
//! `[S]^d` with the uniform-rate continuous-time forward process.
//!
//! Every distribution is held as a dense mass vector over all `S^d` states,
//! so divergences, scores and sampler laws are computed exactly rather than
//! estimated.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod forward;
pub mod quadrature;
pub mod reverse;
pub mod rng;
pub mod runner;
pub mod score;
pub mod state;

pub use error::{Error, Result};
pub use estimator::{Estimator, ScoreEstimatorSpec, TimeGrid};
pub use state::{DenseDistribution, Distribution, FactorizedDistribution, SequenceState, StateSpace};
