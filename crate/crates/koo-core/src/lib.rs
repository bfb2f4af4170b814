//! Knock-one-out (KOO) statistics for scalable variable selection in
//! multivariate linear regression.
//!
//! Given a response matrix `Y` (n x p) and a predictor matrix `X` (n x k),
//! the KOO statistic of predictor `j` measures how much residual information
//! is lost when column `j` is removed from the full model; predictors whose
//! statistic exceeds a threshold are kept. This crate provides:
//!
//! - dimension-checked containers and the projection algebra behind the
//!   statistics ([`dataset`]),
//! - the statistics themselves plus their asymptotic limits and fluctuation
//!   formulas ([`koo`]),
//! - an excess-kurtosis estimator and the multiplier-bootstrap threshold
//!   ([`kurtosis`], [`bootstrap`]),
//! - threshold rules (bootstrap, AIC, BIC, Cp, fixed margin) and ranked
//!   selection reports ([`select`]),
//! - a simulation laboratory for selection-rule studies and empirical
//!   verification of the asymptotic theory ([`sim`], [`verify`]).
//!
//! All randomized operations take explicit 64-bit seeds and derive
//! per-replicate substreams, so results are reproducible regardless of the
//! number of worker threads.

pub mod bootstrap;
pub mod dataset;
pub mod dist;
pub mod error;
pub mod koo;
pub mod kurtosis;
pub mod rng;
pub mod select;
pub mod sim;
pub mod verify;

pub use bootstrap::{
    bootstrap_maxima, bootstrap_threshold, quantile_from_maxima, BootstrapConfig,
    ThresholdEstimate,
};
pub use dataset::{
    build_dataset, knockout_directions, residual_gram, DesignCache, Dimensions, ProjectionCache,
    RegressionDataset,
};
pub use dist::ErrorDist;
pub use error::{Error, Result};
pub use koo::{
    chisq_ratio_oracle_sample, clt_covariance, clt_true_variance, koo_statistics,
    lawley_hotelling_statistics, log_lr_statistics, signal_strength, spurious_limit, true_limit,
    CltQuantities, KooProfile, TrueModelSpec,
};
pub use kurtosis::{
    excess_kurtosis_estimate, matched_sampler, matched_sampler_with_convention,
    BernoulliSignConvention, KurtosisEstimate,
};
pub use select::{build_report, select, RuleOutcome, SelectionReport, SelectionRule};
pub use sim::{
    default_rules, generate_scenario_data, run_trials, Setting, SimReport, SimRule, SimScenario,
    SimTally,
};
pub use verify::{
    figure1_experiment, verify_all, verify_clt_spurious, verify_clt_true, verify_limits,
    verify_tau, Figure1Design, LawSummary, VerificationRecord, VerificationReport,
};
