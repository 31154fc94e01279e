//! Bayesian predictive information criteria for regression models with
//! intensified priors: DIC, WAIC, PIIC, its sparse restricted variant, and
//! PIIC2, which adds a penalty for selecting the prior hyperparameters.
//!
//! The crate is organised bottom-up:
//!
//! * [`models`]: datasets, likelihoods, priors and the per-observation
//!   log-density `log g(z, theta; xi)`.
//! * [`inference`]: MAP estimation, conjugate posteriors, adaptive MCMC and
//!   active-set restriction.
//! * [`criteria`]: predictive densities, WAIC/DIC, the Fisher-type matrix
//!   pair, PIIC and the hyperparameter score machinery behind PIIC2.
//! * [`hyperopt`]: grid plus Nelder-Mead search over `log xi`.
//! * [`causal`]: inverse-probability-weighted versions for marginal
//!   structural models.
//! * [`experiments`]: the simulation harness used to compare criteria.

pub mod causal;
pub mod criteria;
pub mod error;
pub mod experiments;
pub mod hyperopt;
pub mod inference;
pub mod linalg;
pub mod models;
pub mod par;
pub mod rng;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
