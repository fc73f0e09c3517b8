//! Random forests of CART trees with cross-validated tuning of the number of
//! candidate features per split and the minimum node size.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Design;
use super::label_folds;
use super::tree::{grow, Presorted, Tree, TreeParams, TreeWorkspace};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate numbers of features tried at each split. Empty means every
    /// value from 1 to the number of features. Values above the number of
    /// features are clamped.
    pub mtry_grid: Vec<usize>,
    pub min_node_grid: Vec<usize>,
    pub inner_folds: usize,
    pub bootstrap: bool,
    /// Seed used by [`fit_forest`](super::fit_forest). When the forest is fit
    /// through [`Algorithm`](super::Algorithm), the caller's seed is used.
    pub seed: u64,
    /// Trees per forest while scoring grid points. `None` uses `n_trees`.
    pub tuning_trees: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry_grid: Vec::new(),
            min_node_grid: vec![1, 5, 10, 25],
            inner_folds: 5,
            bootstrap: true,
            seed: 0,
            tuning_trees: None,
        }
    }
}

impl ForestParams {
    /// A forest with one fixed `(mtry, min_node)` pair and no tuning.
    pub fn fixed(mtry: usize, min_node: usize) -> Self {
        Self { mtry_grid: vec![mtry], min_node_grid: vec![min_node], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_trees == 0 {
            return bad("forest needs at least one tree");
        }
        if self.tuning_trees == Some(0) {
            return bad("tuning_trees must be at least 1");
        }
        if self.min_node_grid.is_empty() || self.min_node_grid.contains(&0) {
            return bad("min_node_grid must be nonempty with values >= 1");
        }
        if self.mtry_grid.contains(&0) {
            return bad("mtry_grid values must be >= 1");
        }
        if self.inner_folds < 2 {
            return bad("inner_folds must be at least 2");
        }
        Ok(())
    }

    /// Grid points in tie-breaking order: ascending mtry, then descending
    /// min_node.
    pub fn grid(&self, p: usize) -> Vec<(usize, usize)> {
        let p = p.max(1);
        let mut mtry: Vec<usize> = if self.mtry_grid.is_empty() {
            (1..=p).collect()
        } else {
            self.mtry_grid.iter().map(|&m| m.min(p)).collect()
        };
        mtry.sort_unstable();
        mtry.dedup();
        let mut min_node = self.min_node_grid.clone();
        min_node.sort_unstable_by(|a, b| b.cmp(a));
        min_node.dedup();
        mtry.iter().flat_map(|&m| min_node.iter().map(move |&q| (m, q))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub mtry: usize,
    pub min_node: usize,
    /// Inner cross-validated mean squared error.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub mtry: usize,
    pub min_node: usize,
    pub tuning: Vec<GridScore>,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn predict(&self, design: &Design) -> Vec<f64> {
        let mut acc = vec![0.0; design.n()];
        for tree in &self.trees {
            tree.add_predictions(design, &mut acc);
        }
        let b = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= b);
        acc
    }
}

fn bootstrap_counts<R: Rng>(rows: &[usize], n: usize, rng: &mut R, counts: &mut Vec<u32>) {
    counts.clear();
    counts.resize(n, 0);
    for _ in 0..rows.len() {
        counts[rows[rng.random_range(0..rows.len())]] += 1;
    }
}

/// Fits the forest, tuning first when the grid has more than one point.
pub fn fit(design: &Design, t: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    params.validate()?;
    let n = design.n();
    let presorted = Presorted::new(design);
    let mut ws = TreeWorkspace::new(n, design.p());
    let grid = params.grid(design.p());

    let (mtry, min_node, tuning) = if grid.len() == 1 {
        (grid[0].0, grid[0].1, Vec::new())
    } else {
        let tuning = tune(design, &presorted, t, params, &grid, seed, &mut ws)?;
        let mut best = 0;
        for (g, s) in tuning.iter().enumerate() {
            if s.loss < tuning[best].loss - 1e-12 {
                best = g;
            }
        }
        (tuning[best].mtry, tuning[best].min_node, tuning)
    };

    let all: Vec<usize> = (0..n).collect();
    let tree_seed = rng::derive(seed, tag::TREE);
    let boot_seed = rng::derive(seed, tag::BOOTSTRAP);
    let mut counts = Vec::new();
    let trees = (0..params.n_trees)
        .map(|b| {
            let tp = TreeParams { min_node, mtry };
            let mut r = rng::stream(tree_seed, b as u64);
            if params.bootstrap {
                bootstrap_counts(&all, n, &mut rng::stream(boot_seed, b as u64), &mut counts);
                grow(design, &presorted, t, Some(&counts), tp, &mut r, &mut ws)
            } else {
                grow(design, &presorted, t, None, tp, &mut r, &mut ws)
            }
        })
        .collect();
    Ok(ForestModel { mtry, min_node, tuning, trees })
}

/// Inner K-fold loss of every grid point. Within a fold every grid point
/// sees the same resamples and tree seeds.
fn tune(
    design: &Design,
    presorted: &Presorted,
    t: &[f64],
    params: &ForestParams,
    grid: &[(usize, usize)],
    seed: u64,
    ws: &mut TreeWorkspace,
) -> Result<Vec<GridScore>> {
    let n = design.n();
    let k = params.inner_folds;
    if n < k {
        return Err(Error::FoldInfeasible(format!("forest tuning needs at least {k} training rows, got {n}")));
    }
    let tune_seed = rng::derive(seed, tag::TUNE);
    let folds = label_folds(t, k, &mut rng::stream(tune_seed, u64::MAX));
    let n_trees = params.tuning_trees.unwrap_or(params.n_trees);
    let mut oof = vec![0.0; grid.len() * n];
    let mut counts = Vec::new();
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let fold_seed = rng::derive(tune_seed, f as u64);
        let tree_seed = rng::derive(fold_seed, tag::TREE);
        let boot_seed = rng::derive(fold_seed, tag::BOOTSTRAP);
        for b in 0..n_trees {
            if params.bootstrap {
                bootstrap_counts(&train, n, &mut rng::stream(boot_seed, b as u64), &mut counts);
            } else {
                counts.clear();
                counts.resize(n, 0);
                train.iter().for_each(|&i| counts[i] = 1);
            }
            for (g, &(mtry, min_node)) in grid.iter().enumerate() {
                let mut r = rng::stream(tree_seed, b as u64);
                let tree = grow(design, presorted, t, Some(&counts), TreeParams { min_node, mtry }, &mut r, ws);
                let nodes = tree.nodes();
                for &i in &test {
                    oof[g * n + i] += nodes[tree.leaf_of(design, i)].value;
                }
            }
        }
    }
    let scale = 1.0 / n_trees as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &(mtry, min_node))| {
            let loss = (0..n).map(|i| (oof[g * n + i] * scale - t[i]).powi(2)).sum::<f64>() / n as f64;
            GridScore { mtry, min_node, loss }
        })
        .collect())
}
