//! Weighted estimation of population average treatment effects from experimental
//! samples, with sensitivity analysis for an omitted confounder of sample selection.
//!
//! The pieces compose in pipeline order:
//!
//! - [`data`]: load and align the experimental sample and the target population.
//! - [`weights`]: entropy balancing or logistic inverse-probability weights.
//! - [`estimators`]: difference in means, weighted and augmented estimators, bootstrap.
//! - [`sensitivity`]: bias as a function of (R², ρ, σ²), robustness values, bounds.
//! - [`benchmark`]: leave-covariates-out calibration of plausible confounders.
//! - [`sim`]: synthetic populations with a known confounder and an oracle harness.
//! - [`report`]: SVG contour and extreme-scenario plots, JSON and text reports.
//! - [`pipeline`]: the whole chain in one call, as the command line runs it.
//!
//! Runnable walkthroughs live under `examples/`.

pub mod benchmark;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod sensitivity;
pub mod sim;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
