//! Prediction algorithms mapping outcome vectors to treatment probabilities.
//!
//! Every algorithm is fit on an outcome matrix and a vector of 0/1 labels and
//! returns an immutable [`Predictor`]. Missing outcome cells are handled by a
//! [`FeatureMap`] learned at fit time.

pub mod ensemble;
pub mod features;
pub mod forest;
pub mod ols;
pub mod tree;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use features::{Design, FeatureMap, MissingMode};
pub use forest::{ForestModel, ForestParams, GridScore};
pub use ols::LinearModel;
pub use tree::Tree;

use crate::data::{Outcomes, Sample};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Version of the predictor JSON document.
pub const FORMAT_VERSION: u32 = 1;

/// A prediction algorithm together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    /// The training treatment share, whatever the input.
    Constant,
    /// Least squares of the label on an intercept and the features.
    Ols,
    /// A single CART tree. `mtry: None` considers every feature at each split.
    Tree {
        min_node: usize,
        mtry: Option<usize>,
    },
    Forest(ForestParams),
    /// Convex combination of members, weighted by cross-fitted loss.
    Ensemble {
        members: Vec<Algorithm>,
        outer_folds: usize,
    },
    /// Runs `inner` on missingness indicators only.
    MissingnessOnly {
        inner: Box<Algorithm>,
    },
}

impl Algorithm {
    /// Least squares plus a tuned random forest, the default ensemble.
    pub fn ols_forest_ensemble() -> Self {
        Algorithm::Ensemble {
            members: vec![Algorithm::Ols, Algorithm::Forest(ForestParams::default())],
            outer_folds: 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Algorithm::Constant => "constant",
            Algorithm::Ols => "ols",
            Algorithm::Tree { .. } => "tree",
            Algorithm::Forest(_) => "forest",
            Algorithm::Ensemble { .. } => "ensemble",
            Algorithm::MissingnessOnly { .. } => "missingness_only",
        }
    }

    /// Short human-readable description, e.g. `ensemble(ols, forest)`.
    pub fn label(&self) -> String {
        match self {
            Algorithm::Ensemble { members, .. } => {
                let names: Vec<String> = members.iter().map(Algorithm::label).collect();
                format!("ensemble({})", names.join(", "))
            }
            Algorithm::MissingnessOnly { inner } => format!("missingness_only({})", inner.label()),
            other => other.kind().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Constant | Algorithm::Ols => Ok(()),
            Algorithm::Tree { min_node, mtry } => {
                if *min_node == 0 || *mtry == Some(0) {
                    Err(Error::InvalidArgument("tree needs min_node >= 1 and mtry >= 1".into()))
                } else {
                    Ok(())
                }
            }
            Algorithm::Forest(p) => p.validate(),
            Algorithm::Ensemble { members, outer_folds } => {
                if members.len() < 2 {
                    return Err(Error::InvalidArgument("ensemble needs at least two members".into()));
                }
                if *outer_folds < 2 {
                    return Err(Error::InvalidArgument("ensemble needs outer_folds >= 2".into()));
                }
                members.iter().try_for_each(Algorithm::validate)
            }
            Algorithm::MissingnessOnly { inner } => inner.validate(),
        }
    }

    /// Fits on `outcomes` with real-valued `labels` (normally 0/1).
    pub fn fit(&self, outcomes: &Outcomes, labels: &[f64], seed: u64) -> Result<Predictor> {
        self.validate()?;
        if outcomes.n() != labels.len() {
            return Err(Error::InvalidArgument(format!("{} outcome rows but {} labels", outcomes.n(), labels.len())));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("cannot fit on an empty sample".into()));
        }
        self.fit_mode(outcomes, labels, seed, MissingMode::ImputeWithIndicators)
    }

    pub fn fit_sample(&self, sample: &Sample, seed: u64) -> Result<Predictor> {
        self.fit(sample.outcomes(), &sample.labels(), seed)
    }

    fn fit_mode(&self, outcomes: &Outcomes, t: &[f64], seed: u64, mode: MissingMode) -> Result<Predictor> {
        let features = FeatureMap::fit(outcomes, mode);
        let mut notes = Vec::new();
        let model = match self {
            Algorithm::MissingnessOnly { inner } => {
                return inner.fit_mode(outcomes, t, seed, MissingMode::IndicatorsOnly).map(|mut p| {
                    p.algorithm = self.clone();
                    p
                });
            }
            Algorithm::Constant => Model::Constant { value: mean(t) },
            Algorithm::Ols => {
                let m = ols::fit(&features.transform(outcomes)?, t);
                if m.rank_deficient {
                    notes.push("rank-deficient design: minimum-norm solution used".to_string());
                }
                Model::Ols(m)
            }
            Algorithm::Tree { min_node, mtry } => {
                let design = features.transform(outcomes)?;
                Model::Tree(fit_tree_design(&design, t, *min_node, *mtry, seed))
            }
            Algorithm::Forest(params) => Model::Forest(forest::fit(&features.transform(outcomes)?, t, params, seed)?),
            Algorithm::Ensemble { members, outer_folds } => {
                let (weights, members, dropped) = fit_ensemble_members(members, *outer_folds, outcomes, t, seed, mode)?;
                for d in &dropped {
                    notes.push(format!("member dropped: {d}"));
                }
                Model::Ensemble { weights, members, dropped }
            }
        };
        Ok(Predictor { algorithm: self.clone(), k: outcomes.k(), features, model, notes })
    }
}

/// Something that can be fit to labelled outcomes. Implemented by
/// [`Algorithm`]; custom implementations let callers wrap or instrument
/// fitting.
pub trait Learner: Sync {
    fn fit(&self, outcomes: &Outcomes, labels: &[f64], seed: u64) -> Result<Predictor>;

    fn label(&self) -> String;

    /// The underlying algorithm, when there is one. Used to enable
    /// algorithm-specific shortcuts.
    fn algorithm(&self) -> Option<&Algorithm> {
        None
    }
}

impl Learner for Algorithm {
    fn fit(&self, outcomes: &Outcomes, labels: &[f64], seed: u64) -> Result<Predictor> {
        Algorithm::fit(self, outcomes, labels, seed)
    }

    fn label(&self) -> String {
        Algorithm::label(self)
    }

    fn algorithm(&self) -> Option<&Algorithm> {
        Some(self)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn fit_tree_design(design: &Design, t: &[f64], min_node: usize, mtry: Option<usize>, seed: u64) -> Tree {
    let presorted = tree::Presorted::new(design);
    let mut ws = tree::TreeWorkspace::new(design.n(), design.p());
    let params = tree::TreeParams { min_node, mtry: mtry.unwrap_or(design.p()).min(design.p()) };
    let mut r = rng::stream(rng::derive(seed, tag::TREE), 0);
    tree::grow(design, &presorted, t, None, params, &mut r, &mut ws)
}

/// Fold labels for internal cross-fitting, balanced within each label class.
pub(crate) fn label_folds<R: Rng>(t: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut folds = vec![0; t.len()];
    let mut offset = 0;
    for class in [false, true] {
        let mut rows: Vec<usize> = (0..t.len()).filter(|&i| (t[i] > 0.5) == class).collect();
        rows.shuffle(rng);
        for (pos, &i) in rows.iter().enumerate() {
            folds[i] = (offset + pos) % k;
        }
        offset += rows.len();
    }
    folds
}

type EnsembleFit = (Vec<f64>, Vec<Predictor>, Vec<String>);

fn fit_ensemble_members(
    members: &[Algorithm],
    outer_folds: usize,
    outcomes: &Outcomes,
    t: &[f64],
    seed: u64,
    mode: MissingMode,
) -> Result<EnsembleFit> {
    let n = t.len();
    if n < outer_folds {
        return Err(Error::FoldInfeasible(format!(
            "ensemble cross-fitting needs at least {outer_folds} rows, got {n}"
        )));
    }
    let folds = label_folds(t, outer_folds, &mut rng::stream(rng::derive(seed, tag::ENSEMBLE), 0));
    let fit_seed = rng::derive(seed, tag::FIT);
    let parts: Vec<(Outcomes, Vec<f64>, Outcomes, Vec<usize>)> = (0..outer_folds)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let t_train = train.iter().map(|&i| t[i]).collect();
            (outcomes.subset(&train), t_train, outcomes.subset(&test), test)
        })
        .collect();

    let mut kept = Vec::new();
    let mut oof_preds = Vec::new();
    let mut dropped = Vec::new();
    'members: for (j, member) in members.iter().enumerate() {
        let member_seed = rng::derive(fit_seed, j as u64);
        let mut oof = vec![0.0; n];
        for (f, (y_train, t_train, y_test, test)) in parts.iter().enumerate() {
            let fitted = member
                .fit_mode(y_train, t_train, rng::derive(member_seed, f as u64), mode)
                .and_then(|p| p.predict(y_test));
            match fitted {
                Ok(pred) => test.iter().zip(pred).for_each(|(&i, v)| oof[i] = v),
                Err(e) => {
                    dropped.push(format!("{} ({e})", member.label()));
                    continue 'members;
                }
            }
        }
        match member.fit_mode(outcomes, t, member_seed, mode) {
            Ok(p) => {
                kept.push(p);
                oof_preds.push(oof);
            }
            Err(e) => dropped.push(format!("{} ({e})", member.label())),
        }
    }
    if kept.len() < 2 {
        return Err(Error::Fit(format!(
            "ensemble needs at least two working members; failures: {}",
            dropped.join("; ")
        )));
    }
    let weights = ensemble::optimal_weights(&oof_preds, t);
    Ok((weights, kept, dropped))
}

/// Fitted state of an algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Constant { value: f64 },
    Ols(LinearModel),
    Tree(Tree),
    Forest(ForestModel),
    Ensemble { weights: Vec<f64>, members: Vec<Predictor>, dropped: Vec<String> },
}

/// A fitted prediction function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    algorithm: Algorithm,
    k: usize,
    features: FeatureMap,
    model: Model,
    notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PredictorDocument {
    format_version: u32,
    predictor: Predictor,
}

impl Predictor {
    pub fn algorithm(&self) -> &Algorithm {
        &self.algorithm
    }

    pub fn kind(&self) -> &'static str {
        self.algorithm.kind()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Fit-time remarks such as a rank-deficient design or dropped members.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Ensemble weights, one per kept member.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Ensemble { weights, .. } => Some(weights),
            _ => None,
        }
    }

    pub fn predict(&self, outcomes: &Outcomes) -> Result<Vec<f64>> {
        if outcomes.k() != self.k {
            return Err(Error::Shape { expected: self.k, actual: outcomes.k() });
        }
        Ok(match &self.model {
            Model::Constant { value } => vec![*value; outcomes.n()],
            Model::Ols(m) => m.predict(&self.features.transform(outcomes)?),
            Model::Tree(t) => t.predict(&self.features.transform(outcomes)?),
            Model::Forest(f) => f.predict(&self.features.transform(outcomes)?),
            Model::Ensemble { weights, members, .. } => {
                let mut acc = vec![0.0; outcomes.n()];
                for (w, m) in weights.iter().zip(members) {
                    if *w != 0.0 {
                        for (a, p) in acc.iter_mut().zip(m.predict(outcomes)?) {
                            *a += w * p;
                        }
                    }
                }
                acc
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PredictorDocument { format_version: FORMAT_VERSION, predictor: self.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PredictorDocument = serde_json::from_str(s)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported predictor format version {}", doc.format_version)));
        }
        Ok(doc.predictor)
    }
}

/// Predicts the training treatment share everywhere.
pub fn fit_constant(train: &Sample) -> Result<Predictor> {
    Algorithm::Constant.fit_sample(train, 0)
}

pub fn fit_ols(train: &Sample) -> Result<Predictor> {
    Algorithm::Ols.fit_sample(train, 0)
}

pub fn fit_tree(train: &Sample, min_node: usize, mtry: usize, seed: u64) -> Result<Predictor> {
    Algorithm::Tree { min_node, mtry: Some(mtry) }.fit_sample(train, seed)
}

/// Fits with `params.seed`.
pub fn fit_forest(train: &Sample, params: &ForestParams) -> Result<Predictor> {
    Algorithm::Forest(params.clone()).fit_sample(train, params.seed)
}

pub fn fit_ensemble(train: &Sample, members: &[Algorithm], outer_folds: usize, seed: u64) -> Result<Predictor> {
    Algorithm::Ensemble { members: members.to_vec(), outer_folds }.fit_sample(train, seed)
}
