//! Model-based clustering with Gaussian mixtures, with standard errors and
//! confidence intervals for the fitted parameters from the jackknife, the
//! nonparametric bootstrap and the weighted likelihood bootstrap.
//!
//! The pipeline is: [`mixture::select_model`] picks `(G, family)` by BIC,
//! [`resample::run_resampling`] refits that structure to each replicate, and
//! [`variance::SeReport`] turns the replicate estimates into standard errors
//! and `MLE ± 2 SE` intervals. [`simulation`] repeats this over simulated
//! datasets to measure interval coverage.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod resample;
pub mod simulation;
pub mod variance;

pub use error::{Error, Result};
pub use exec::Execution;
