use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::rng::{self, tag};

/// Which labels a permutation test shuffles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationScope {
    /// Only hold-out labels, against fixed predictions.
    HoldoutOnly,
    /// All labels; fold models are refit.
    FullSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationUnit {
    Observation,
    Cluster,
}

/// Randomization structure for permutation draws.
///
/// Draw `index` is a pure function of `(seed, index)` and the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub scope: PermutationScope,
    pub unit: PermutationUnit,
    /// Permute only within strata of the sample.
    pub within_strata: bool,
    /// Extra per-row grouping (for example folds); permutations stay inside
    /// each group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<usize>>,
    pub count: usize,
    pub seed: u64,
}

impl PermutationPlan {
    /// Plan matching the sample's own randomization: cluster units when the
    /// sample has clusters, within strata when it has strata.
    pub fn for_sample(sample: &Sample, scope: PermutationScope, count: usize, seed: u64) -> Self {
        Self {
            scope,
            unit: if sample.clusters().is_some() { PermutationUnit::Cluster } else { PermutationUnit::Observation },
            within_strata: sample.strata().is_some(),
            groups: None,
            count,
            seed,
        }
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Self {
        self.groups = Some(groups);
        self
    }

    /// Precompute the unit and group structure for repeated draws.
    pub fn prepare(&self, sample: &Sample) -> PreparedPlan {
        let units: Vec<Vec<usize>> = match (self.unit, sample.clusters()) {
            (PermutationUnit::Cluster, Some(_)) => sample.randomization_units().into_iter().map(|u| u.rows).collect(),
            _ => (0..sample.n()).map(|i| vec![i]).collect(),
        };
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (u, rows) in units.iter().enumerate() {
            let first = rows[0];
            let stratum = match (self.within_strata, sample.strata()) {
                (true, Some(s)) => s[first],
                _ => 0,
            };
            let extra = self.groups.as_ref().map_or(0, |g| g[first]);
            groups.entry((stratum, extra)).or_default().push(u);
        }
        let unit_labels = units.iter().map(|rows| sample.treatment()[rows[0]]).collect();
        PreparedPlan {
            base_seed: rng::derive(self.seed, tag::PERMUTE),
            n: sample.n(),
            units,
            groups: groups.into_values().collect(),
            unit_labels,
        }
    }
}

/// A plan bound to a sample.
#[derive(Debug, Clone)]
pub struct PreparedPlan {
    base_seed: u64,
    n: usize,
    units: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    unit_labels: Vec<u8>,
}

impl PreparedPlan {
    /// Permuted treatment vector for draw `index` (draws are numbered from 1).
    pub fn draw(&self, index: u64) -> Vec<u8> {
        let mut r = rng::stream(self.base_seed, index);
        let mut out = vec![0u8; self.n];
        let mut labels = Vec::new();
        for group in &self.groups {
            labels.clear();
            labels.extend(group.iter().map(|&u| self.unit_labels[u]));
            labels.shuffle(&mut r);
            for (&u, &t) in group.iter().zip(&labels) {
                for &row in &self.units[u] {
                    out[row] = t;
                }
            }
        }
        out
    }
}

/// Permuted treatment labels for draw `index` of `plan`.
pub fn draw_permutation(plan: &PermutationPlan, index: u64, sample: &Sample) -> Vec<u8> {
    plan.prepare(sample).draw(index)
}
