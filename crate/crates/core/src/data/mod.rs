//! Samples, hold-out splits, fold assignments and permutation plans.
//!
//! Randomization structure (clusters and strata) is carried by the
//! [`Sample`] and honored by every operation here: clusters are never split
//! across folds, hold-out parts or permutation swaps, and permutations stay
//! inside their stratum.

mod folds;
mod io;
mod permutation;
mod sample;

pub use folds::{
    make_folds, make_folds_with, split_holdout, split_holdout_rows, FoldAssignment, FoldMode, HoldoutSplit,
};
pub use io::{load_sample, write_sample, Schema};
pub use permutation::{draw_permutation, PermutationPlan, PermutationScope, PermutationUnit, PreparedPlan};
pub use sample::{Outcomes, RandomizationUnit, Sample};
