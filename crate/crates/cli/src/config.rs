//! Run configuration: a flat TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use predtest::data::Schema;
use predtest::simulation::{move_stretch_grid, PowerTest};
use predtest::{Algorithm, ForestParams, Loss};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every setting, each optional so that file values and flags can be merged.
/// Flags win over the file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input with a header row.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Name of the 0/1 treatment column.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratum: Option<String>,
    /// Outcome columns, comma separated. Default: every other column.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,

    /// ols, tree, forest, ensemble or constant.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algo: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    /// Candidate features per split; empty tunes over all.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtry: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_node: Option<Vec<usize>>,
    /// Folds used to tune forests and to weight ensemble members.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_folds: Option<usize>,

    /// squared or nll.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    /// cv or holdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    /// Permutations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Master seed. Required.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Also run the Wald and corrected t-tests.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baselines: Option<bool>,

    /// Sample size per replication.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    /// Move values; with `s`, replaces the default 6 x 6 grid.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<f64>>,
    /// Stretch values.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    /// Tests to simulate: wald, bonferroni, holm, sidak, prediction.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tests: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_treat: Option<f64>,

    /// Directory of a finished `test` run to interpret.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<PathBuf>,
    /// Refit the predictor on a fresh split instead of reading a prior run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit: Option<bool>,
    /// Number of partition cells.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// level_set or tree.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
}

macro_rules! merge_fields {
    ($low:ident, $high:ident, $($f:ident),*) => {
        RunConfig { $($f: $high.$f.or($low.$f)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// `overrides` wins wherever it is set.
    pub fn merged(self, overrides: RunConfig) -> Self {
        let (low, high) = (self, overrides);
        merge_fields!(
            low,
            high,
            input,
            treatment,
            cluster,
            stratum,
            outcomes,
            algo,
            trees,
            mtry,
            min_node,
            inner_folds,
            loss,
            design,
            k,
            train_fraction,
            b,
            alpha,
            seed,
            workers,
            out,
            baselines,
            n,
            replications,
            m,
            s,
            tests,
            p_treat,
            from,
            refit,
            cells,
            partition
        )
    }

    /// Fills every unset field that has a default.
    pub fn resolved(mut self) -> Self {
        fn set<T>(slot: &mut Option<T>, value: T) {
            slot.get_or_insert(value);
        }
        set(&mut self.algo, "ensemble".into());
        set(&mut self.trees, ForestParams::default().n_trees);
        set(&mut self.mtry, Vec::new());
        set(&mut self.min_node, ForestParams::default().min_node_grid);
        set(&mut self.inner_folds, 5);
        set(&mut self.loss, "squared".into());
        set(&mut self.design, "cv".into());
        set(&mut self.k, 5);
        set(&mut self.train_fraction, 0.5);
        set(&mut self.b, 199);
        set(&mut self.alpha, 0.05);
        set(&mut self.workers, 1);
        set(&mut self.baselines, true);
        set(&mut self.n, 100);
        set(&mut self.replications, 439);
        set(&mut self.tests, vec!["wald".into(), "bonferroni".into(), "prediction".into()]);
        set(&mut self.p_treat, 0.5);
        set(&mut self.refit, false);
        set(&mut self.cells, predtest::interpretation::DEFAULT_CELLS);
        set(&mut self.partition, "level_set".into());
        self
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("`seed` is required (no default seed is used)".into()))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Config("`out` directory is required".into()))
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::Config("`input` is required".into()))
    }

    pub fn schema(&self) -> Result<Schema, CliError> {
        let treatment = self.treatment.clone().ok_or_else(|| CliError::Config("`treatment` is required".into()))?;
        Ok(Schema {
            treatment,
            cluster: self.cluster.clone(),
            stratum: self.stratum.clone(),
            outcomes: self.outcomes.clone(),
        })
    }

    pub fn algorithm(&self) -> Result<Algorithm, CliError> {
        let forest = ForestParams {
            n_trees: self.trees.unwrap_or(100),
            mtry_grid: self.mtry.clone().unwrap_or_default(),
            min_node_grid: self.min_node.clone().unwrap_or_default(),
            inner_folds: self.inner_folds.unwrap_or(5),
            ..ForestParams::default()
        };
        let algorithm = match self.algo.as_deref().unwrap_or("ensemble") {
            "constant" => Algorithm::Constant,
            "ols" => Algorithm::Ols,
            "tree" => Algorithm::Tree { min_node: forest.min_node_grid.first().copied().unwrap_or(1), mtry: None },
            "forest" => Algorithm::Forest(forest),
            "ensemble" => Algorithm::Ensemble {
                members: vec![Algorithm::Ols, Algorithm::Forest(forest)],
                outer_folds: self.inner_folds.unwrap_or(5),
            },
            other => return Err(CliError::Config(format!("`algo`: unknown algorithm `{other}`"))),
        };
        algorithm.validate().map_err(|e| CliError::Config(format!("`algo`: {e}")))?;
        Ok(algorithm)
    }

    pub fn loss(&self) -> Result<Loss, CliError> {
        match self.loss.as_deref().unwrap_or("squared") {
            "squared" | "squared_error" => Ok(Loss::SquaredError),
            "nll" | "neg_log_likelihood" => Ok(Loss::NegLogLikelihood),
            other => Err(CliError::Config(format!("`loss`: expected squared or nll, got `{other}`"))),
        }
    }

    pub fn is_cv(&self) -> Result<bool, CliError> {
        match self.design.as_deref().unwrap_or("cv") {
            "cv" => Ok(true),
            "holdout" | "h" => Ok(false),
            other => Err(CliError::Config(format!("`design`: expected cv or holdout, got `{other}`"))),
        }
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        let alpha = self.alpha.unwrap_or(0.05);
        if alpha > 0.0 && alpha < 1.0 {
            Ok(alpha)
        } else {
            Err(CliError::Config(format!("`alpha` must lie in (0, 1), got {alpha}")))
        }
    }

    pub fn grid(&self) -> Result<Vec<(f64, f64)>, CliError> {
        match (&self.m, &self.s) {
            (None, None) => Ok(move_stretch_grid()),
            (Some(m), Some(s)) if !m.is_empty() && !s.is_empty() => {
                Ok(m.iter().flat_map(|&a| s.iter().map(move |&b| (a, b))).collect())
            }
            _ => Err(CliError::Config("`m` and `s` must be given together and be nonempty".into())),
        }
    }

    pub fn power_tests(&self) -> Result<Vec<PowerTest>, CliError> {
        let names = self.tests.clone().unwrap_or_default();
        if names.is_empty() {
            return Err(CliError::Config("`tests` must name at least one test".into()));
        }
        names
            .iter()
            .map(|name| match name.as_str() {
                "wald" => Ok(PowerTest::Wald),
                "bonferroni" => Ok(PowerTest::Bonferroni),
                "holm" => Ok(PowerTest::Holm),
                "sidak" => Ok(PowerTest::Sidak),
                "prediction" => {
                    let algorithm = self.algorithm()?;
                    let b = self.b.unwrap_or(199);
                    Ok(if self.is_cv()? {
                        PowerTest::Cv { algorithm, k: self.k.unwrap_or(5), b }
                    } else {
                        PowerTest::Holdout { algorithm, train_fraction: self.train_fraction.unwrap_or(0.5), b }
                    })
                }
                other => Err(CliError::Config(format!("`tests`: unknown test `{other}`"))),
            })
            .collect()
    }
}
