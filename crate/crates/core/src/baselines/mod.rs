//! Classical comparison tests: the joint Wald test from seemingly unrelated
//! regressions of the outcomes on treatment, per-outcome Welch t-tests,
//! multiple-comparison corrections and t-tests of a fixed linear index.

mod index;
mod multiple;
mod ttest;
mod wald;

pub use index::{fixed_index_test, IndexSpec, IndexTestResult};
pub use multiple::{multiple_comparison, Correction, MultipleComparison};
pub use ttest::{t_test_per_outcome, welch_t_test, TTestResult};
pub use wald::{sur_wald_test, sur_wald_test_with, WaldOptions, WaldResult};

use crate::data::Sample;

/// Rows with every outcome observed, and the number of rows dropped.
fn listwise(sample: &Sample) -> (Vec<usize>, usize) {
    let rows = sample.outcomes().complete_rows();
    let dropped = sample.n() - rows.len();
    (rows, dropped)
}
