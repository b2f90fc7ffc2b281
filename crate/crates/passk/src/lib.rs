//! Estimation and extrapolation of pass@k success rates from limited
//! sampling budgets.
//!
//! The crate ingests per-problem attempt outcomes (or success/attempt
//! tallies), fits a beta-binomial difficulty distribution to them, and
//! extrapolates the dataset-level pass@k curve far beyond the sampled
//! budget. Two baselines are included for comparison: a log-log
//! least-squares power law and a discretized scaled-beta fit. Sampling
//! budgets can be spent uniformly or routed adaptively to the problems
//! with the fewest observed successes, and an evaluation harness scores
//! every method against ground truth over budget x k grids with
//! bootstrap confidence intervals.
//!
//! All randomness is driven by explicit seeds; identical inputs and
//! seeds produce identical outputs.

pub mod allocation;
pub mod betafit;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod numerics;
pub mod records;
pub mod regression;
pub mod synthetic;

pub use error::{Error, Result};
