//! Interpretable summaries of a fitted prediction test: implied mean effects,
//! the predicted-treatment index, and partitions of the outcome space with
//! honest hold-out estimates.

mod criterion;
mod estimates;
mod implied;
mod partition;

pub use criterion::{
    cell_criterion, optimal_level_set_cells, partition_criterion, support_variance, PartitionCriterion,
};
pub use estimates::{honest_level_set_estimates, honest_partition_estimates, CellEstimate, PartitionEstimate};
pub use implied::{implied_ate, implied_effect_of, index_summary, ImpliedEffect, IndexSummary};
pub use partition::{
    level_set_partition, level_set_partition_for, tree_partition, tree_partition_with, CellRule, Partition, SizeRule,
    DEFAULT_CELLS,
};
