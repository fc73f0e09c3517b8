use serde::{Deserialize, Serialize};

use super::partition::Partition;
use crate::data::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCriterion {
    /// `Σ_ℓ f̄(ℓ) Δ(ℓ)²` with `Δ(ℓ) = (f̄₁(ℓ) − f̄₀(ℓ)) / f̄(ℓ)`.
    pub variance: f64,
    /// Mean of `(T − p̄(ℓ(Y)))²` with `p̄(ℓ)` the cell treatment share.
    pub regression_loss: f64,
    pub nonempty_cells: usize,
}

/// Empirical criteria of a cell assignment. Empty cells contribute nothing.
pub fn cell_criterion(cells: &[usize], treatment: &[u8]) -> Result<PartitionCriterion> {
    if cells.len() != treatment.len() || cells.is_empty() {
        return Err(Error::InvalidArgument("need one cell per unit".into()));
    }
    let n = cells.len() as f64;
    let n_cells = cells.iter().max().map_or(0, |&c| c + 1);
    let mut count = vec![0usize; n_cells];
    let mut treated = vec![0usize; n_cells];
    for (&c, &t) in cells.iter().zip(treatment) {
        count[c] += 1;
        treated[c] += usize::from(t);
    }
    let n1: usize = treated.iter().sum();
    let n0 = cells.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Undefined("both treated and control units are needed".into()));
    }
    let (mut variance, mut loss, mut nonempty) = (0.0, 0.0, 0);
    for (&m, &t1) in count.iter().zip(&treated) {
        if m == 0 {
            continue;
        }
        nonempty += 1;
        let f = m as f64 / n;
        let f1 = t1 as f64 / n1 as f64;
        let f0 = (m - t1) as f64 / n0 as f64;
        let delta = (f1 - f0) / f;
        variance += f * delta * delta;
        let share = t1 as f64 / m as f64;
        loss += m as f64 * share * (1.0 - share);
    }
    Ok(PartitionCriterion { variance, regression_loss: loss / n, nonempty_cells: nonempty })
}

pub fn partition_criterion(partition: &Partition, sample: &Sample) -> Result<PartitionCriterion> {
    cell_criterion(&partition.assign(sample.outcomes())?, sample.treatment())
}

/// Population variance criterion of a partition of a discrete outcome
/// distribution with support masses `mass` and treatment probabilities
/// `p_y = P(T = 1 | Y = y)`. `cells[i]` is the cell of support point `i`.
pub fn support_variance(p_y: &[f64], mass: &[f64], cells: &[usize]) -> f64 {
    let total: f64 = mass.iter().sum();
    let p = p_y.iter().zip(mass).map(|(q, m)| q * m).sum::<f64>() / total;
    let n_cells = cells.iter().max().map_or(0, |&c| c + 1);
    let (mut f, mut f1, mut f0) = (vec![0.0; n_cells], vec![0.0; n_cells], vec![0.0; n_cells]);
    for ((&c, &q), &m) in cells.iter().zip(p_y).zip(mass) {
        let m = m / total;
        f[c] += m;
        f1[c] += m * q / p;
        f0[c] += m * (1.0 - q) / (1.0 - p);
    }
    (0..n_cells)
        .filter(|&c| f[c] > 0.0)
        .map(|c| {
            let d = (f1[c] - f0[c]) / f[c];
            f[c] * d * d
        })
        .sum()
}

/// Best partition of a discrete distribution into at most `cells` level
/// sets of `p_y`, found by dynamic programming over the support sorted by
/// `p_y`. Returns the cell of every support point and the criterion value.
pub fn optimal_level_set_cells(p_y: &[f64], mass: &[f64], cells: usize) -> Result<(Vec<usize>, f64)> {
    let m = p_y.len();
    if m == 0 || mass.len() != m || cells == 0 {
        return Err(Error::InvalidArgument("need matching nonempty support and at least one cell".into()));
    }
    let total: f64 = mass.iter().sum();
    let p = p_y.iter().zip(mass).map(|(q, w)| q * w).sum::<f64>() / total;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Undefined("treatment probability must lie inside (0, 1)".into()));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_y[a].total_cmp(&p_y[b]).then(a.cmp(&b)));
    // Prefix sums of mass and mass * p over the sorted support.
    let mut w = vec![0.0; m + 1];
    let mut wq = vec![0.0; m + 1];
    for (r, &i) in order.iter().enumerate() {
        w[r + 1] = w[r] + mass[i] / total;
        wq[r + 1] = wq[r] + mass[i] / total * p_y[i];
    }
    let scale = (p * (1.0 - p)).powi(2);
    // f̄ Δ² for a group of sorted points a..b, via Δ = (p̄ − p) / (p(1 − p)).
    let score = |a: usize, b: usize| {
        let f = w[b] - w[a];
        if f <= 0.0 {
            return 0.0;
        }
        let d = wq[b] - wq[a] - p * f;
        d * d / f / scale
    };
    let groups = cells.min(m);
    let mut best = vec![vec![f64::NEG_INFINITY; m + 1]; groups + 1];
    let mut cut = vec![vec![0usize; m + 1]; groups + 1];
    best[0][0] = 0.0;
    for g in 1..=groups {
        for b in g..=m {
            for a in (g - 1)..b {
                let v = best[g - 1][a] + score(a, b);
                if v > best[g][b] {
                    best[g][b] = v;
                    cut[g][b] = a;
                }
            }
        }
    }
    let mut assignment = vec![0; m];
    let mut b = m;
    for g in (1..=groups).rev() {
        let a = cut[g][b];
        for &i in &order[a..b] {
            assignment[i] = g - 1;
        }
        b = a;
    }
    Ok((assignment, best[groups][m]))
}
