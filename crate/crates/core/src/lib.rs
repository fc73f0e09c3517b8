//! Prediction-based tests for the effect of a randomized treatment on a group
//! of outcomes.
//!
//! The central idea is reverse regression: if treatment status can be
//! predicted from the outcome vector better than chance, the outcome
//! distributions of treated and control units differ. Out-of-sample loss of a
//! prediction algorithm is calibrated against its permutation distribution,
//! which yields an exact test regardless of the algorithm used.
//!
//! Module map:
//!
//! * [`data`]: samples, hold-out splits, folds and permutation plans.
//! * [`predictors`]: constant, least-squares, CART tree, tuned random forest
//!   and convex ensembles.
//! * [`testing`]: losses, the hold-out and cross-validation permutation tests.
//! * [`baselines`]: SUR Wald test, per-outcome t-tests, multiple-comparison
//!   corrections and fixed-index tests.
//! * [`interpretation`]: implied effect vectors and outcome-space partitions.
//! * [`simulation`]: data-generating processes and power studies.

pub mod baselines;
pub mod data;
pub mod error;
pub mod interpretation;
pub mod predictors;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod testing;

pub use data::{
    draw_permutation, load_sample, make_folds, split_holdout, FoldAssignment, FoldMode, Outcomes, PermutationPlan,
    PermutationScope, PermutationUnit, Sample, Schema,
};
pub use error::{Error, Result};
pub use predictors::{Algorithm, ForestParams, MissingMode, Predictor};
pub use testing::{run_cv_test, run_holdout_test, CvOptions, HoldoutOptions, Loss, TestResult};
