use serde::{Deserialize, Serialize};

use super::loss::{mean_loss, mean_loss_unchecked, permutation_pvalue, Loss};
use super::{check_permutations, run_indexed, Seeds, TestDesign, TestResult};
use crate::data::{split_holdout_rows, PermutationPlan, PermutationScope, Sample};
use crate::error::Result;
use crate::predictors::{Learner, Predictor};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoldoutOptions {
    pub train_fraction: f64,
    pub b: usize,
    pub loss: Loss,
    pub seed: u64,
    /// Threads for the permutation arms; 0 uses all available.
    pub workers: usize,
}

impl Default for HoldoutOptions {
    fn default() -> Self {
        Self { train_fraction: 0.5, b: 999, loss: Loss::SquaredError, seed: 0, workers: 1 }
    }
}

/// Mean loss of `predictor` on the hold-out sample.
pub fn holdout_loss(predictor: &Predictor, holdout: &Sample, loss: Loss) -> Result<f64> {
    let predictions = predictor.predict(holdout.outcomes())?;
    mean_loss(loss, &predictions, holdout.treatment())
}

/// Hold-out test: fit once on the training part, then compare the hold-out
/// loss with the losses of the same predictions against permuted hold-out
/// labels.
pub fn run_holdout_test(sample: &Sample, learner: &dyn Learner, options: &HoldoutOptions) -> Result<TestResult> {
    check_permutations(options.b)?;
    let seeds = Seeds {
        seed: options.seed,
        partition: rng::derive(options.seed, tag::SPLIT),
        fit: rng::derive(options.seed, tag::FIT),
        permutation: rng::derive(options.seed, tag::PERMUTE),
    };
    let split = split_holdout_rows(sample, options.train_fraction, seeds.partition)?;
    let train = sample.subset(&split.train);
    let holdout = sample.subset(&split.holdout);

    let predictor = learner.fit(train.outcomes(), &train.labels(), seeds.fit)?;
    let predictions = predictor.predict(holdout.outcomes())?;
    let observed_loss = mean_loss(options.loss, &predictions, holdout.treatment())?;

    let plan = PermutationPlan::for_sample(&holdout, PermutationScope::HoldoutOnly, options.b, seeds.permutation)
        .prepare(&holdout);
    let permuted_losses = run_indexed(options.workers, options.b, |i| {
        Ok(mean_loss_unchecked(options.loss, &predictions, &plan.draw(i as u64 + 1)))
    })?;

    Ok(TestResult {
        design: TestDesign::Holdout,
        loss_kind: options.loss,
        algorithm: learner.label(),
        observed_loss,
        p_value: permutation_pvalue(observed_loss, &permuted_losses),
        b: options.b,
        k_or_m: split.train.len(),
        n: sample.n(),
        permuted_losses,
        predictions,
        prediction_rows: split.holdout,
        folds: None,
        train_rows: Some(split.train),
        seeds,
        notes: predictor.notes().to_vec(),
        predictor: Some(predictor),
    })
}
