//! Exact Shapley values for sensor anomaly localization.
//!
//! Sensor readings are modeled as a multivariate Gaussian. The value of a
//! coalition of sensors is the negative log of their joint marginal density,
//! and each sensor's Shapley value is compared against its single-sensor
//! value `v({i})` as a localization statistic. The [`harness`] runs paired
//! Monte Carlo trials to estimate the minimum probability of error of both
//! tests.

pub mod attack;
pub mod bench;
pub mod coalition;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod report;
pub mod shapley;

/// Largest sensor universe a [`Coalition`] or [`GaussianModel`] can hold.
pub const MAX_SENSORS: usize = 32;

/// Largest universe for exact Shapley enumeration.
pub const MAX_EXACT_SENSORS: usize = 24;

pub use attack::{apply_attack, AttackKind, AttackSpec};
pub use coalition::Coalition;
pub use error::{Error, Result};
pub use gaussian::{GaussianModel, Observation};
pub use harness::{
    analytic_pe_gaussian, binomial_ci, optimize_threshold_exact, optimize_threshold_grid,
    run_experiment, run_trial, ErrorRateReport, ExperimentConfig, ExperimentOutcome, ScorePair,
    Statistic, ThresholdMode,
};
pub use shapley::{
    all_shapley, exact_shapley, sampled_shapley, shapley_weight, truncated_shapley, AdditiveValue,
    FnValue, ShapleyResult, ValueFunction,
};
