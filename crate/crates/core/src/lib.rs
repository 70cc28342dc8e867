//! Total-variation penalized logistic regression for ordered binary data.
//!
//! The estimator minimizes the average logistic loss of a log-odds vector plus
//! `lambda` times its total variation, optionally over the sup-norm ball
//! `{ |f_i| <= B }`. Alongside the solver the crate computes the finite-sample
//! quantities that govern its excess risk (jump structure, weights, noise
//! level, effective sparsity, oracle bound) and a seeded Monte Carlo harness
//! that checks those bounds empirically.
//!
//! Module map:
//! - [`model`]: logistic loss, risks, gradient, curvature constants
//! - [`tvprox`]: total variation, difference operator, exact TV proximal map
//! - [`solver`]: accelerated proximal gradient fit with KKT certification
//! - [`theory`]: jump structures and the bound quantities
//! - [`sim`]: scenarios, replicate experiments, rate fits, tail checks

pub mod error;
pub mod model;
pub mod sim;
pub mod solver;
pub mod theory;
pub mod tvprox;

pub use solver::{fit, kkt_residual, FitConfig, FitResult};
pub use theory::{JumpStructure, TheoryBounds, TheoryParams};

pub use error::{Error, Result};
pub use model::{CurvatureConstants, Dataset, Signal};


