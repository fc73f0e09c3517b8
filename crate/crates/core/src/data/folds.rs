use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{RandomizationUnit, Sample};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Redraws allowed before a degenerate fold assignment becomes an error.
pub const MAX_FOLD_ATTEMPTS: usize = 10;

/// How folds and hold-out splits are balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Balance each fold on treatment (and stratum, when present).
    #[default]
    Stratified,
    /// Balance on stratum only; treatment counts per fold are left to chance.
    Random,
}

/// Assignment of every row to one of `k` folds (0-based fold indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of_unit: Vec<usize>,
    k: usize,
    stratified: bool,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.fold_of_unit[row]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.fold_of_unit
    }

    /// Whether fold membership was balanced on treatment.
    pub fn is_treatment_stratified(&self) -> bool {
        self.stratified
    }

    /// Rows of fold `j`, ascending.
    pub fn test_rows(&self, j: usize) -> Vec<usize> {
        (0..self.fold_of_unit.len()).filter(|&i| self.fold_of_unit[i] == j).collect()
    }

    /// Rows outside fold `j`, ascending.
    pub fn train_rows(&self, j: usize) -> Vec<usize> {
        (0..self.fold_of_unit.len()).filter(|&i| self.fold_of_unit[i] != j).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_unit {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Group units by (stratum, treatment) or by stratum alone, in key order,
/// shuffled within group and then ordered by decreasing unit size.
fn grouped_units<R: rand::Rng>(units: &[RandomizationUnit], by_treatment: bool, rng: &mut R) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for (u, unit) in units.iter().enumerate() {
        let t = if by_treatment { unit.treatment } else { 0 };
        groups.entry((unit.stratum, t)).or_default().push(u);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.shuffle(rng);
            g.sort_by(|&a, &b| units[b].rows.len().cmp(&units[a].rows.len()));
            g
        })
        .collect()
}

/// Assign units to `k` folds. Within each group, a unit goes to the fold
/// holding the fewest rows of that group, then the fewest rows overall, then
/// the earliest position in a random fold order.
fn assign_folds<R: rand::Rng>(
    sample: &Sample,
    units: &[RandomizationUnit],
    k: usize,
    by_treatment: bool,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut rank = vec![0; k];
    for (pos, &f) in order.iter().enumerate() {
        rank[f] = pos;
    }
    let mut total = vec![0usize; k];
    let mut fold_of = vec![0usize; sample.n()];
    for group in grouped_units(units, by_treatment, rng) {
        let mut in_group = vec![0usize; k];
        for u in group {
            let f = (0..k).min_by_key(|&f| (in_group[f], total[f], rank[f])).expect("k >= 1");
            let size = units[u].rows.len();
            in_group[f] += size;
            total[f] += size;
            for &row in &units[u].rows {
                fold_of[row] = f;
            }
        }
    }
    fold_of
}

/// Draw a `k`-fold assignment balanced on treatment (and strata).
pub fn make_folds(sample: &Sample, k: usize, seed: u64) -> Result<FoldAssignment> {
    make_folds_with(sample, k, seed, FoldMode::Stratified)
}

pub fn make_folds_with(sample: &Sample, k: usize, seed: u64, mode: FoldMode) -> Result<FoldAssignment> {
    if k < 2 || k > sample.n() {
        return Err(Error::InvalidArgument(format!("number of folds must be in [2, n = {}], got {k}", sample.n())));
    }
    let units = sample.randomization_units();
    if units.len() < k {
        return Err(Error::FoldInfeasible(format!("{} randomization units cannot fill {k} folds", units.len())));
    }
    // With one unit per fold there is nothing to balance.
    let stratified = mode == FoldMode::Stratified && units.len() > k;
    let base = rng::derive(seed, tag::FOLDS);
    let treatment = sample.treatment();
    let mut last_problem = String::new();
    for attempt in 0..MAX_FOLD_ATTEMPTS {
        let mut r = rng::stream(base, attempt as u64);
        let fold_of = assign_folds(sample, &units, k, stratified, &mut r);
        let mut treated = vec![0usize; k];
        let mut size = vec![0usize; k];
        for (i, &f) in fold_of.iter().enumerate() {
            size[f] += 1;
            treated[f] += usize::from(treatment[i]);
        }
        let all_treated: usize = treated.iter().sum();
        let degenerate = (0..k).find(|&f| {
            let train_treated = all_treated - treated[f];
            let train_size = sample.n() - size[f];
            train_treated == 0 || train_treated == train_size
        });
        match degenerate {
            None => return Ok(FoldAssignment { fold_of_unit: fold_of, k, stratified }),
            Some(f) => last_problem = format!("training set without fold {f} has a single treatment value"),
        }
    }
    Err(Error::DegenerateFolds { attempts: MAX_FOLD_ATTEMPTS, message: last_problem })
}

/// Row indices of a hold-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Largest-remainder allocation of `total` across groups proportional to
/// `sizes`.
fn allocate(sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = sizes.iter().map(|&s| s as f64 * fraction).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = total.saturating_sub(alloc.iter().sum());
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for g in by_remainder {
        if remaining == 0 {
            break;
        }
        if alloc[g] < sizes[g] {
            alloc[g] += 1;
            remaining -= 1;
        }
    }
    alloc
}

/// Draw a hold-out split, stratified on treatment and strata, that keeps
/// clusters whole.
pub fn split_holdout_rows(sample: &Sample, train_fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = sample.n();
    let target = (train_fraction * n as f64).round() as usize;
    if target == 0 || target == n {
        return Err(Error::SplitSize(format!("train fraction {train_fraction} of n = {n} leaves an empty part")));
    }
    let units = sample.randomization_units();
    let mut r = rng::stream(rng::derive(seed, tag::SPLIT), 0);
    let groups = grouped_units(&units, true, &mut r);
    let group_rows: Vec<usize> = groups.iter().map(|g| g.iter().map(|&u| units[u].rows.len()).sum()).collect();
    let targets = allocate(&group_rows, train_fraction, target);

    let mut in_train = vec![false; n];
    for (group, &goal) in groups.iter().zip(&targets) {
        let mut taken = 0usize;
        for &u in group {
            let size = units[u].rows.len();
            // Add the cluster only if it moves the count strictly closer to goal.
            if (taken + size).abs_diff(goal) < taken.abs_diff(goal) {
                taken += size;
                for &row in &units[u].rows {
                    in_train[row] = true;
                }
            }
        }
    }
    let train: Vec<usize> = (0..n).filter(|&i| in_train[i]).collect();
    let holdout: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    if train.is_empty() || holdout.is_empty() {
        return Err(Error::SplitSize("cluster sizes leave an empty part".into()));
    }
    let t = sample.treatment();
    let both = |rows: &[usize]| {
        let treated = rows.iter().filter(|&&i| t[i] == 1).count();
        treated > 0 && treated < rows.len()
    };
    if !both(&train) || !both(&holdout) {
        return Err(Error::DegenerateSplit("both parts must contain treated and control units".into()));
    }
    Ok(HoldoutSplit { train, holdout })
}

/// Split into `(train, holdout)` sub-samples.
pub fn split_holdout(sample: &Sample, train_fraction: f64, seed: u64) -> Result<(Sample, Sample)> {
    let split = split_holdout_rows(sample, train_fraction, seed)?;
    Ok((sample.subset(&split.train), sample.subset(&split.holdout)))
}
