//! Hold-out and cross-validation prediction tests with permutation p-values.
//!
//! Both tests measure how well treatment can be predicted out of sample from
//! the outcomes and compare that loss with its distribution under random
//! relabeling of treatment. The hold-out test fits once and permutes the
//! hold-out labels against fixed predictions; the cross-validation test
//! refits every fold model on every permuted labeling.

mod cv;
mod holdout;
mod loss;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cv::{run_cv_test, CvOptions};
pub use holdout::{holdout_loss, run_holdout_test, HoldoutOptions};
pub use loss::{mean_loss, permutation_pvalue, pointwise_loss, Loss, NLL_CLIP};

use crate::error::{Error, Result};
use crate::predictors::Predictor;

/// Smallest number of permutations accepted by the tests, the least that
/// allows rejection at the 5% level.
pub const MIN_PERMUTATIONS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestDesign {
    #[serde(rename = "H")]
    Holdout,
    #[serde(rename = "CV")]
    CrossValidation,
}

/// Seeds handed to each random step of a test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub seed: u64,
    /// Seed of the hold-out split or of the fold assignment.
    pub partition: u64,
    pub fit: u64,
    pub permutation: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub design: TestDesign,
    pub loss_kind: Loss,
    pub algorithm: String,
    #[serde(rename = "L_hat")]
    pub observed_loss: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub b: usize,
    /// Number of folds for cross-validation, training-set size for hold-out.
    #[serde(rename = "K_or_m")]
    pub k_or_m: usize,
    pub n: usize,
    pub permuted_losses: Vec<f64>,
    /// Out-of-sample predictions, aligned with `prediction_rows`.
    pub predictions: Vec<f64>,
    /// Sample rows the predictions belong to: hold-out rows, or all rows.
    pub prediction_rows: Vec<usize>,
    /// Fold of every row (cross-validation only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<usize>>,
    /// Training rows (hold-out only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rows: Option<Vec<usize>>,
    pub seeds: Seeds,
    /// The fitted hold-out predictor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<Predictor>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl TestResult {
    /// Rejection at level `alpha`: `p <= alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_permutations(b: usize) -> Result<()> {
    if b < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_PERMUTATIONS} permutations, got {b}")));
    }
    Ok(())
}

/// Evaluates `arm(i)` for `i` in `0..count` on `workers` threads (0 uses
/// the global pool), returning results in index order.
pub(crate) fn run_indexed<T, F>(workers: usize, count: usize, arm: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match workers {
        1 => (0..count).map(arm).collect(),
        0 => (0..count).into_par_iter().map(arm).collect(),
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| (0..count).into_par_iter().map(arm).collect()),
    }
}
