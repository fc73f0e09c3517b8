use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Outcomes, Sample};
use crate::error::{Error, Result};
use crate::predictors::{Algorithm, FeatureMap, Model, Predictor, Tree};

/// Default number of cells.
pub const DEFAULT_CELLS: usize = 4;

/// Margin added above the largest prediction for the last cutoff.
const EDGE: f64 = 1e-9;

/// How level-set cutoffs are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    /// Cutoffs at the `ℓ/L` quantiles of the training predictions.
    EqualMass,
    /// Explicit increasing cutoffs `c_0 < … < c_L`.
    Custom(Vec<f64>),
}

/// How units are mapped to cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellRule {
    /// Cell `ℓ` holds units with `c_{ℓ-1} <= T̂ < c_ℓ`.
    LevelSet { cutoffs: Vec<f64> },
    /// Cells are the leaves of a regression tree of treatment on outcomes,
    /// listed left to right.
    Tree { tree: Tree, features: FeatureMap, leaves: Vec<usize>, column_names: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub rule: CellRule,
    /// The predictor defining level sets, when attached.
    #[serde(skip)]
    predictor: Option<Arc<Predictor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor_label: Option<String>,
    pub warnings: Vec<String>,
}

impl Partition {
    pub fn n_cells(&self) -> usize {
        match &self.rule {
            CellRule::LevelSet { cutoffs } => cutoffs.len() - 1,
            CellRule::Tree { leaves, .. } => leaves.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.rule {
            CellRule::LevelSet { .. } => "level_set",
            CellRule::Tree { .. } => "tree",
        }
    }

    pub fn cutoffs(&self) -> Option<&[f64]> {
        match &self.rule {
            CellRule::LevelSet { cutoffs } => Some(cutoffs),
            CellRule::Tree { .. } => None,
        }
    }

    pub fn predictor(&self) -> Option<&Predictor> {
        self.predictor.as_deref()
    }

    /// Attaches the predictor whose level sets this partition describes.
    pub fn with_predictor(mut self, predictor: Arc<Predictor>) -> Self {
        self.predictor_label = Some(predictor.algorithm().label());
        self.predictor = Some(predictor);
        self
    }

    /// Cell of each prediction. Values below the first cutoff fall in the
    /// first cell and values at or above the last in the last cell.
    pub fn assign_predictions(&self, predictions: &[f64]) -> Result<Vec<usize>> {
        let CellRule::LevelSet { cutoffs } = &self.rule else {
            return Err(Error::InvalidArgument("tree partitions assign outcomes, not predictions".into()));
        };
        let interior = &cutoffs[1..cutoffs.len() - 1];
        Ok(predictions.iter().map(|&v| interior.partition_point(|&c| c <= v)).collect())
    }

    /// Cell of each row of `outcomes`.
    pub fn assign(&self, outcomes: &Outcomes) -> Result<Vec<usize>> {
        match &self.rule {
            CellRule::LevelSet { .. } => {
                let predictor = self
                    .predictor
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("level-set partition has no predictor attached".into()))?;
                self.assign_predictions(&predictor.predict(outcomes)?)
            }
            CellRule::Tree { tree, features, leaves, .. } => {
                let design = features.transform(outcomes)?;
                let mut cell_of_node = vec![usize::MAX; tree.nodes().len()];
                for (c, &leaf) in leaves.iter().enumerate() {
                    cell_of_node[leaf] = c;
                }
                Ok((0..design.n()).map(|i| cell_of_node[tree.leaf_of(&design, i)]).collect())
            }
        }
    }

    /// Human-readable definition of every cell.
    pub fn cell_labels(&self) -> Vec<String> {
        match &self.rule {
            CellRule::LevelSet { cutoffs } => {
                cutoffs.windows(2).map(|w| format!("{:.4} <= T_hat < {:.4}", w[0], w[1])).collect()
            }
            CellRule::Tree { tree, features, leaves, column_names } => {
                let names = feature_names(features, column_names);
                let bounds = tree.node_bounds(names.len());
                leaves
                    .iter()
                    .map(|&leaf| {
                        let parts: Vec<String> = bounds[leaf]
                            .iter()
                            .enumerate()
                            .filter_map(|(j, &(lo, hi))| match (lo.is_finite(), hi.is_finite()) {
                                (false, false) => None,
                                (true, false) => Some(format!("{} >= {lo:.4}", names[j])),
                                (false, true) => Some(format!("{} < {hi:.4}", names[j])),
                                (true, true) => Some(format!("{lo:.4} <= {} < {hi:.4}", names[j])),
                            })
                            .collect();
                        if parts.is_empty() {
                            "all".to_string()
                        } else {
                            parts.join(" & ")
                        }
                    })
                    .collect()
            }
        }
    }
}

fn feature_names(features: &FeatureMap, column_names: &[String]) -> Vec<String> {
    let mut names = Vec::with_capacity(features.width());
    if features.mode() == crate::predictors::MissingMode::ImputeWithIndicators {
        names.extend(column_names.iter().cloned());
    }
    names.extend(features.indicator_columns().iter().map(|&j| format!("missing({})", column_names[j])));
    names
}

/// Level-set partition of the prediction scale built from training
/// predictions.
///
/// Equal-mass cutoffs sit midway between consecutive sorted predictions at
/// the `ℓ/L` quantiles. Cutoffs that would leave a cell without training
/// predictions are dropped, reducing the number of cells with a warning. The
/// outer cutoffs are 0 and `1 + ε` when every prediction lies in `[0, 1]`,
/// and just outside the observed range otherwise.
pub fn level_set_partition(train_predictions: &[f64], cells: usize, rule: &SizeRule) -> Result<Partition> {
    if cells < 2 {
        return Err(Error::InvalidArgument("a partition needs at least two cells".into()));
    }
    if train_predictions.is_empty() || train_predictions.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("need finite training predictions".into()));
    }
    let mut sorted = train_predictions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mut warnings = Vec::new();
    let cutoffs = match rule {
        SizeRule::Custom(c) => {
            if c.len() != cells + 1 {
                return Err(Error::InvalidArgument(format!("{cells} cells need {} cutoffs", cells + 1)));
            }
            if c.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument("cutoffs must be strictly increasing".into()));
            }
            c.clone()
        }
        SizeRule::EqualMass => {
            if min == max {
                return Err(Error::Undefined("all predictions are identical; only one cell".into()));
            }
            let probability = min >= 0.0 && max <= 1.0;
            let first = if probability { 0.0 } else { min - EDGE * (1.0 + min.abs()) };
            let last = if probability { 1.0 + EDGE } else { max + EDGE * (1.0 + max.abs()) };
            let n = sorted.len();
            let mut cut = vec![first];
            for l in 1..cells {
                let j = ((n * l) as f64 / cells as f64).round() as usize;
                if j == 0 || j >= n {
                    continue;
                }
                let c = 0.5 * (sorted[j - 1] + sorted[j]);
                let prev = *cut.last().unwrap_or(&first);
                // Keep only cutoffs that leave a nonempty cell below them.
                let below = sorted.partition_point(|&v| v < c) - sorted.partition_point(|&v| v < prev);
                if c > prev && below > 0 && c <= max {
                    cut.push(c);
                }
            }
            cut.push(last);
            if cut.len() - 1 < cells {
                warnings.push(format!("only {} distinct cells could be formed; requested {cells}", cut.len() - 1));
            }
            cut
        }
    };
    Ok(Partition { rule: CellRule::LevelSet { cutoffs }, predictor: None, predictor_label: None, warnings })
}

/// Level-set partition for `predictor` using its predictions on `train`.
pub fn level_set_partition_for(
    predictor: Arc<Predictor>,
    train: &Outcomes,
    cells: usize,
    rule: &SizeRule,
) -> Result<Partition> {
    let predictions = predictor.predict(train)?;
    Ok(level_set_partition(&predictions, cells, rule)?.with_predictor(predictor))
}

pub fn tree_partition(train: &Sample, cells: usize) -> Result<Partition> {
    tree_partition_with(train, cells, 1)
}

/// Grows a regression tree of treatment on all outcomes and prunes it to at
/// most `cells` leaves by repeatedly removing the split with the smallest
/// loss reduction.
pub fn tree_partition_with(train: &Sample, cells: usize, min_node: usize) -> Result<Partition> {
    if cells < 2 {
        return Err(Error::InvalidArgument("a partition needs at least two cells".into()));
    }
    let predictor = Algorithm::Tree { min_node, mtry: None }.fit_sample(train, 0)?;
    let Model::Tree(full) = predictor.model() else { unreachable!("tree algorithm yields a tree model") };
    let tree = full.prune_to(cells);
    let leaves = tree.leaves();
    let mut warnings = Vec::new();
    if leaves.len() < cells {
        warnings.push(format!("tree has only {} leaves; requested {cells}", leaves.len()));
    }
    Ok(Partition {
        rule: CellRule::Tree {
            tree,
            features: predictor.features().clone(),
            leaves,
            column_names: train.column_names().to_vec(),
        },
        predictor: None,
        predictor_label: None,
        warnings,
    })
}
