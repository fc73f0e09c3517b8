use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::loss::{mean_loss, mean_loss_unchecked, permutation_pvalue, Loss};
use super::{check_permutations, run_indexed, Seeds, TestDesign, TestResult};
use crate::data::{make_folds_with, FoldMode, Outcomes, PermutationPlan, PermutationScope, Sample};
use crate::error::Result;
use crate::predictors::{Algorithm, Learner};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub k: usize,
    pub b: usize,
    pub loss: Loss,
    pub seed: u64,
    pub fold_mode: FoldMode,
    /// Threads for the permutation arms; 0 uses all available.
    pub workers: usize,
    /// Allow closed-form shortcuts (leave-one-out least squares). Results
    /// agree with explicit refitting up to rounding.
    pub shortcuts: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            b: 199,
            loss: Loss::SquaredError,
            seed: 0,
            fold_mode: FoldMode::Stratified,
            workers: 1,
            shortcuts: true,
        }
    }
}

struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
    y_train: Outcomes,
    y_test: Outcomes,
    seed: u64,
}

/// Out-of-fold predictions for a labeling of the full sample.
enum Engine<'a> {
    Refit { learner: &'a dyn Learner, folds: Vec<Fold> },
    LeaveOneOutOls(LooOls),
}

impl Engine<'_> {
    fn predict(&self, labels: &[u8], notes: Option<&mut BTreeSet<String>>) -> Result<Vec<f64>> {
        match self {
            Engine::LeaveOneOutOls(loo) => Ok(loo.predict(labels)),
            Engine::Refit { learner, folds } => {
                let mut out = vec![0.0; labels.len()];
                let mut notes = notes;
                for fold in folds {
                    let t: Vec<f64> = fold.train.iter().map(|&i| f64::from(labels[i])).collect();
                    let predictor = learner.fit(&fold.y_train, &t, fold.seed)?;
                    if let Some(n) = notes.as_deref_mut() {
                        n.extend(predictor.notes().iter().cloned());
                    }
                    for (&i, p) in fold.test.iter().zip(predictor.predict(&fold.y_test)?) {
                        out[i] = p;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Leave-one-out least squares via the hat matrix: the prediction for row
/// `i` from the fit without `i` is `(fitted_i - h_ii t_i) / (1 - h_ii)`.
struct LooOls {
    q: DMatrix<f64>,
    leverage: Vec<f64>,
}

impl LooOls {
    fn new(outcomes: &Outcomes) -> Option<Self> {
        let n = outcomes.n();
        let cols = outcomes.k() + 1;
        if outcomes.has_missing() || n <= cols {
            return None;
        }
        let x = DMatrix::from_fn(n, cols, |i, j| if j == 0 { 1.0 } else { outcomes.raw(i, j - 1) });
        let qr = x.qr();
        let r = qr.r();
        let r_max = (0..cols).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
        if (0..cols).any(|j| r[(j, j)].abs() <= r_max * n as f64 * f64::EPSILON) {
            return None;
        }
        let q = qr.q();
        let leverage: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();
        if leverage.iter().any(|&h| h > 1.0 - 1e-8) {
            return None;
        }
        Some(Self { q, leverage })
    }

    fn predict(&self, labels: &[u8]) -> Vec<f64> {
        let t = DMatrix::from_iterator(labels.len(), 1, labels.iter().map(|&v| f64::from(v)));
        let fitted = &self.q * (self.q.transpose() * &t);
        (0..labels.len())
            .map(|i| {
                let h = self.leverage[i];
                (fitted[i] - h * t[i]) / (1.0 - h)
            })
            .collect()
    }
}

/// Cross-validation test: out-of-fold loss of `learner` compared with the
/// out-of-fold losses obtained after permuting treatment and refitting every
/// fold model.
///
/// Folds are reused across permutations. With treatment-stratified folds the
/// permutations also keep every fold's treated count fixed. Fold model `J`
/// uses the same fit seed in every arm.
pub fn run_cv_test(sample: &Sample, learner: &dyn Learner, options: &CvOptions) -> Result<TestResult> {
    check_permutations(options.b)?;
    let seeds = Seeds {
        seed: options.seed,
        partition: rng::derive(options.seed, tag::FOLDS),
        fit: rng::derive(options.seed, tag::FIT),
        permutation: rng::derive(options.seed, tag::PERMUTE),
    };
    let folds = make_folds_with(sample, options.k, seeds.partition, options.fold_mode)?;
    let mut plan = PermutationPlan::for_sample(sample, PermutationScope::FullSample, options.b, seeds.permutation);
    if folds.is_treatment_stratified() {
        plan = plan.with_groups(folds.as_slice().to_vec());
    }
    let plan = plan.prepare(sample);

    let mut notes = BTreeSet::new();
    let loo = (options.shortcuts && options.k == sample.n() && learner.algorithm() == Some(&Algorithm::Ols))
        .then(|| LooOls::new(sample.outcomes()))
        .flatten();
    let engine = match loo {
        Some(l) => {
            notes.insert("leave-one-out least squares evaluated in closed form".to_string());
            Engine::LeaveOneOutOls(l)
        }
        None => Engine::Refit {
            learner,
            folds: (0..folds.k())
                .map(|j| {
                    let train = folds.train_rows(j);
                    let test = folds.test_rows(j);
                    Fold {
                        y_train: sample.outcomes().subset(&train),
                        y_test: sample.outcomes().subset(&test),
                        train,
                        test,
                        seed: rng::derive(seeds.fit, j as u64),
                    }
                })
                .collect(),
        },
    };

    let predictions = engine.predict(sample.treatment(), Some(&mut notes))?;
    let observed_loss = mean_loss(options.loss, &predictions, sample.treatment())?;
    let permuted_losses = run_indexed(options.workers, options.b, |i| {
        let labels = plan.draw(i as u64 + 1);
        Ok(mean_loss_unchecked(options.loss, &engine.predict(&labels, None)?, &labels))
    })?;

    Ok(TestResult {
        design: TestDesign::CrossValidation,
        loss_kind: options.loss,
        algorithm: learner.label(),
        observed_loss,
        p_value: permutation_pvalue(observed_loss, &permuted_losses),
        b: options.b,
        k_or_m: folds.k(),
        n: sample.n(),
        permuted_losses,
        predictions,
        prediction_rows: (0..sample.n()).collect(),
        folds: Some(folds.as_slice().to_vec()),
        train_rows: None,
        seeds,
        predictor: None,
        notes: notes.into_iter().collect(),
    })
}
