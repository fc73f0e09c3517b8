use serde::{Deserialize, Serialize};

use super::partition::{CellRule, Partition};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub label: String,
    pub n_treated: usize,
    pub n_control: usize,
    /// Share of treated units falling in the cell.
    pub f1: f64,
    /// Share of control units falling in the cell.
    pub f0: f64,
    /// Share of all units falling in the cell.
    pub f: f64,
    /// `(f1 − f0) / f`; `None` for an empty cell.
    pub delta: Option<f64>,
    /// Treated minus control mean of each outcome within the cell; `None`
    /// when an arm has no observed value there.
    pub mean_diffs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub kind: String,
    pub cells: Vec<CellEstimate>,
    /// Pearson chi-square statistic of the cell × treatment table, over
    /// nonempty cells.
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
    /// `Σ f Δ²` over nonempty cells.
    pub variance: f64,
    pub column_names: Vec<String>,
    pub warnings: Vec<String>,
}

/// Cell statistics computed on hold-out data only.
///
/// For level-set partitions, cells with no hold-out units are merged into
/// their upper neighbour (the last into its lower neighbour). Empty tree
/// leaves are reported with `delta = None`.
pub fn honest_partition_estimates(partition: &Partition, holdout: &Sample) -> Result<PartitionEstimate> {
    let cells = partition.assign(holdout.outcomes())?;
    estimates_for_cells(partition, cells, holdout)
}

/// Like [`honest_partition_estimates`] for a level-set partition, with the
/// hold-out units placed by given predictions instead of a stored predictor.
pub fn honest_level_set_estimates(
    partition: &Partition,
    predictions: &[f64],
    holdout: &Sample,
) -> Result<PartitionEstimate> {
    if predictions.len() != holdout.n() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} rows", predictions.len(), holdout.n())));
    }
    let cells = partition.assign_predictions(predictions)?;
    estimates_for_cells(partition, cells, holdout)
}

fn estimates_for_cells(partition: &Partition, mut cells: Vec<usize>, holdout: &Sample) -> Result<PartitionEstimate> {
    let mut labels = partition.cell_labels();
    let mut warnings = Vec::new();
    let n = holdout.n();
    let t = holdout.treatment();
    let n1 = holdout.n_treated();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::DegenerateSample("hold-out needs treated and control units".into()));
    }

    let count = |cells: &[usize], n_cells: usize| {
        let mut c = vec![0usize; n_cells];
        cells.iter().for_each(|&l| c[l] += 1);
        c
    };
    if let CellRule::LevelSet { cutoffs } = &partition.rule {
        let sizes = count(&cells, labels.len());
        if sizes.contains(&0) {
            // Build groups of original cells, each ending at a nonempty cell.
            let mut group_of = vec![0usize; sizes.len()];
            let mut groups: Vec<Vec<usize>> = vec![Vec::new()];
            for (l, &s) in sizes.iter().enumerate() {
                groups.last_mut().unwrap().push(l);
                if s > 0 {
                    groups.push(Vec::new());
                }
            }
            let trailing = groups.pop().unwrap_or_default();
            if let Some(last) = groups.last_mut() {
                last.extend(trailing);
            }
            for (g, members) in groups.iter().enumerate() {
                for &l in members {
                    group_of[l] = g;
                }
            }
            cells.iter_mut().for_each(|c| *c = group_of[*c]);
            labels = groups
                .iter()
                .map(|m| format!("{:.4} <= T_hat < {:.4}", cutoffs[m[0]], cutoffs[m[m.len() - 1] + 1]))
                .collect();
            warnings.push(format!(
                "{} empty hold-out cells merged with neighbours",
                sizes.iter().filter(|&&s| s == 0).count()
            ));
        }
    }

    let n_cells = labels.len();
    let k = holdout.k();
    let y = holdout.outcomes();
    let mut estimates = Vec::with_capacity(n_cells);
    let mut sums = vec![[0.0f64; 2]; n_cells * k];
    let mut counts = vec![[0usize; 2]; n_cells * k];
    let mut arm_count = vec![[0usize; 2]; n_cells];
    for i in 0..n {
        let (c, a) = (cells[i], usize::from(t[i]));
        arm_count[c][a] += 1;
        for j in 0..k {
            if let Some(v) = y.get(i, j) {
                sums[c * k + j][a] += v;
                counts[c * k + j][a] += 1;
            }
        }
    }
    let (mut chi_square, mut variance, mut nonempty) = (0.0, 0.0, 0usize);
    for (c, label) in labels.into_iter().enumerate() {
        let [c0, c1] = arm_count[c];
        let m = c0 + c1;
        let f1 = c1 as f64 / n1 as f64;
        let f0 = c0 as f64 / n0 as f64;
        let f = m as f64 / n as f64;
        let delta = (m > 0).then(|| (f1 - f0) / f);
        if let Some(d) = delta {
            nonempty += 1;
            variance += f * d * d;
            for (observed, arm_total) in [(c1, n1), (c0, n0)] {
                let expected = m as f64 * arm_total as f64 / n as f64;
                chi_square += (observed as f64 - expected).powi(2) / expected;
            }
        } else {
            warnings.push(format!("cell '{label}' has no hold-out units"));
        }
        let mean_diffs = (0..k)
            .map(|j| {
                let [s0, s1] = sums[c * k + j];
                let [k0, k1] = counts[c * k + j];
                (k0 > 0 && k1 > 0).then(|| s1 / k1 as f64 - s0 / k0 as f64)
            })
            .collect();
        estimates.push(CellEstimate { label, n_treated: c1, n_control: c0, f1, f0, f, delta, mean_diffs });
    }
    let df = nonempty.saturating_sub(1);
    let p_value = if df == 0 { 1.0 } else { stats::chi2_sf(chi_square, df as f64) };
    Ok(PartitionEstimate {
        kind: partition.kind().to_string(),
        cells: estimates,
        chi_square,
        df,
        p_value,
        variance,
        column_names: holdout.column_names().to_vec(),
        warnings,
    })
}

impl PartitionEstimate {
    /// Plain-text table of the cell estimates.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let names = self.column_names.join("  ");
        out.push_str(&format!("{:<4} {:>5} {:>5} {:>9}  mean diff ({names})  cell\n", "cell", "n1", "n0", "delta"));
        for (l, c) in self.cells.iter().enumerate() {
            let delta = c.delta.map_or("NA".to_string(), |d| format!("{d:.4}"));
            let diffs: Vec<String> =
                c.mean_diffs.iter().map(|d| d.map_or("NA".to_string(), |v| format!("{v:.4}"))).collect();
            out.push_str(&format!(
                "{:<4} {:>5} {:>5} {:>9}  {}  {}\n",
                l + 1,
                c.n_treated,
                c.n_control,
                delta,
                diffs.join("  "),
                c.label
            ));
        }
        out.push_str(&format!(
            "chi-square = {:.4} on {} df, p = {:.4}; variance criterion = {:.4}\n",
            self.chi_square, self.df, self.p_value, self.variance
        ));
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}
