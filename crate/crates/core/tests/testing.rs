mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::{assert_close, gaussian_sample, separable_sample};
use predtest::data::{make_folds, FoldMode};
use predtest::predictors::Learner;
use predtest::testing::{holdout_loss, mean_loss, permutation_pvalue, pointwise_loss, MIN_PERMUTATIONS};
use predtest::{
    run_cv_test, run_holdout_test, Algorithm, CvOptions, Error, ForestParams, HoldoutOptions, Loss, Outcomes,
    PermutationPlan, PermutationScope, Predictor, Result, Sample,
};
use proptest::prelude::*;

/// Counts fits of an inner algorithm.
struct Counting {
    inner: Algorithm,
    fits: AtomicUsize,
}

impl Counting {
    fn new(inner: Algorithm) -> Self {
        Self { inner, fits: AtomicUsize::new(0) }
    }
}

impl Learner for Counting {
    fn fit(&self, outcomes: &Outcomes, labels: &[f64], seed: u64) -> Result<Predictor> {
        self.fits.fetch_add(1, Ordering::SeqCst);
        self.inner.fit(outcomes, labels, seed)
    }

    fn label(&self) -> String {
        format!("counting {}", self.inner.label())
    }
}

fn small_forest() -> Algorithm {
    Algorithm::Forest(ForestParams { n_trees: 10, ..ForestParams::fixed(1, 5) })
}

#[test]
fn pointwise_losses() {
    assert_eq!(pointwise_loss(Loss::SquaredError, 0.5, 1.0).unwrap(), 0.25);
    assert_eq!(pointwise_loss(Loss::SquaredError, 1.0, 1.0).unwrap(), 0.0);
    assert_close(pointwise_loss(Loss::NegLogLikelihood, 0.5, 0.0).unwrap(), std::f64::consts::LN_2, 1e-15);
    assert!(pointwise_loss(Loss::NegLogLikelihood, 1.0, 0.0).unwrap().is_finite());
    assert!(pointwise_loss(Loss::SquaredError, f64::NAN, 0.0).is_err());
}

#[test]
fn pvalue_counting_rule() {
    let mut permuted: Vec<f64> = (0..99).map(|i| 1.0 + f64::from(i)).collect();
    assert_eq!(permutation_pvalue(0.5, &permuted), 0.01);
    assert_eq!(permutation_pvalue(1000.0, &permuted), 1.0);
    permuted[..4].iter_mut().for_each(|v| *v = 0.5);
    assert_eq!(permutation_pvalue(0.5, &permuted), 0.05);
    assert_eq!(permutation_pvalue(0.0, &vec![1.0; 19]), 0.05);
}

#[test]
fn holdout_loss_of_constant_half() {
    let y = Outcomes::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
    let s = Sample::new(y, vec![0, 1, 0, 1]).unwrap();
    let p = Algorithm::Constant.fit_sample(&s, 0).unwrap();
    assert_eq!(holdout_loss(&p, &s, Loss::SquaredError).unwrap(), 0.25);
}

#[test]
fn separable_holdout_test_reaches_minimum_pvalue() {
    let s = separable_sample(100, 3);
    let opts = HoldoutOptions { b: 199, seed: 5, ..HoldoutOptions::default() };
    let r = run_holdout_test(&s, &Algorithm::Tree { min_node: 1, mtry: None }, &opts).unwrap();
    assert_eq!(r.observed_loss, 0.0);
    assert_eq!(r.p_value, 0.005);
    assert_eq!(r.permuted_losses.len(), 199);
}

#[test]
fn holdout_test_fits_once_and_never_predicts_training_rows() {
    let s = gaussian_sample(60, 2, 0.5, 4);
    let learner = Counting::new(Algorithm::Ols);
    let opts = HoldoutOptions { b: 99, seed: 8, ..HoldoutOptions::default() };
    let r = run_holdout_test(&s, &learner, &opts).unwrap();
    assert_eq!(learner.fits.load(Ordering::SeqCst), 1);
    let train = r.train_rows.clone().unwrap();
    assert!(r.prediction_rows.iter().all(|i| !train.contains(i)));
    assert_eq!(train.len() + r.prediction_rows.len(), 60);
    let refit = r.predictor.as_ref().unwrap().predict(s.subset(&r.prediction_rows).outcomes()).unwrap();
    assert_eq!(refit, r.predictions);
    let labels: Vec<u8> = r.prediction_rows.iter().map(|&i| s.treatment()[i]).collect();
    assert_eq!(mean_loss(Loss::SquaredError, &r.predictions, &labels).unwrap(), r.observed_loss);
}

#[test]
fn cv_test_refits_k_models_per_arm() {
    let s = gaussian_sample(40, 2, 0.5, 6);
    let learner = Counting::new(Algorithm::Ols);
    let opts = CvOptions { k: 4, b: 25, seed: 1, ..CvOptions::default() };
    let r = run_cv_test(&s, &learner, &opts).unwrap();
    assert_eq!(learner.fits.load(Ordering::SeqCst), 4 * (25 + 1));
    assert_eq!(r.permuted_losses.len(), 25);
    assert_eq!(r.k_or_m, 4);
}

#[test]
fn out_of_fold_prediction_ignores_own_label() {
    let s = gaussian_sample(50, 2, 0.8, 12);
    for algo in [Algorithm::Ols, small_forest()] {
        let opts = CvOptions { k: 5, b: 19, seed: 3, fold_mode: FoldMode::Random, ..CvOptions::default() };
        let base = run_cv_test(&s, &algo, &opts).unwrap();
        for i in [0, 17, 49] {
            let mut t = s.treatment().to_vec();
            t[i] = 1 - t[i];
            let flipped = run_cv_test(&s.with_treatment(t), &algo, &opts).unwrap();
            assert_eq!(flipped.folds, base.folds);
            assert_eq!(flipped.predictions[i], base.predictions[i], "row {i}");
        }
    }
}

#[test]
fn stratified_cv_permutations_keep_fold_treated_counts() {
    let s = gaussian_sample(60, 2, 0.0, 2);
    let folds = make_folds(&s, 5, 9).unwrap();
    let plan = PermutationPlan::for_sample(&s, PermutationScope::FullSample, 50, 4)
        .with_groups(folds.as_slice().to_vec())
        .prepare(&s);
    let count = |t: &[u8], f: usize| folds.test_rows(f).iter().filter(|&&i| t[i] == 1).count();
    for b in 1..=50 {
        let t = plan.draw(b);
        for f in 0..5 {
            assert_eq!(count(&t, f), count(s.treatment(), f));
        }
    }
}

#[test]
fn leave_one_out_shortcut_matches_refitting() {
    let s = gaussian_sample(30, 3, 0.6, 13);
    let fast = CvOptions { k: 30, b: 39, seed: 2, ..CvOptions::default() };
    let slow = CvOptions { shortcuts: false, ..fast.clone() };
    let a = run_cv_test(&s, &Algorithm::Ols, &fast).unwrap();
    let b = run_cv_test(&s, &Algorithm::Ols, &slow).unwrap();
    assert!(a.notes.iter().any(|n| n.contains("closed form")));
    assert!(b.notes.is_empty());
    for (x, y) in a.predictions.iter().zip(&b.predictions) {
        assert!((x - y).abs() < 1e-10);
    }
    for (x, y) in a.permuted_losses.iter().zip(&b.permuted_losses) {
        assert!((x - y).abs() < 1e-10);
    }
    assert_eq!(a.p_value, b.p_value);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let s = gaussian_sample(60, 2, 0.4, 14);
    let algo = Algorithm::Ensemble { members: vec![Algorithm::Ols, small_forest()], outer_folds: 3 };
    let one = CvOptions { k: 5, b: 19, seed: 6, workers: 1, ..CvOptions::default() };
    let three = CvOptions { workers: 3, ..one.clone() };
    assert_eq!(run_cv_test(&s, &algo, &one).unwrap(), run_cv_test(&s, &algo, &three).unwrap());

    let h1 = HoldoutOptions { b: 199, seed: 6, workers: 1, ..HoldoutOptions::default() };
    let h3 = HoldoutOptions { workers: 3, ..h1.clone() };
    assert_eq!(
        run_holdout_test(&s, &Algorithm::Ols, &h1).unwrap().to_json().unwrap(),
        run_holdout_test(&s, &Algorithm::Ols, &h3).unwrap().to_json().unwrap()
    );
}

#[test]
fn strong_signal_gives_minimum_pvalue() {
    let s = gaussian_sample(80, 2, 4.0, 15);
    let r = run_cv_test(&s, &Algorithm::Ols, &CvOptions { b: 99, seed: 1, ..CvOptions::default() }).unwrap();
    assert_eq!(r.p_value, 0.01);
}

#[test]
fn log_likelihood_loss_is_finite_with_unclipped_predictions() {
    let s = gaussian_sample(60, 2, 3.0, 16);
    let opts = CvOptions { b: 19, loss: Loss::NegLogLikelihood, seed: 1, ..CvOptions::default() };
    let r = run_cv_test(&s, &Algorithm::Ols, &opts).unwrap();
    assert!(r.observed_loss.is_finite());
    assert!(r.permuted_losses.iter().all(|l| l.is_finite()));
}

#[test]
fn too_few_permutations_are_rejected() {
    let s = gaussian_sample(40, 2, 0.0, 1);
    let opts = CvOptions { b: MIN_PERMUTATIONS - 1, ..CvOptions::default() };
    assert!(matches!(run_cv_test(&s, &Algorithm::Ols, &opts), Err(Error::InvalidArgument(_))));
    let opts = HoldoutOptions { b: 5, ..HoldoutOptions::default() };
    assert!(matches!(run_holdout_test(&s, &Algorithm::Ols, &opts), Err(Error::InvalidArgument(_))));
}

#[test]
fn result_json_has_documented_keys() {
    let s = gaussian_sample(40, 2, 0.0, 1);
    let r = run_cv_test(&s, &Algorithm::Ols, &CvOptions { b: 19, seed: 4, ..CvOptions::default() }).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    for key in ["design", "loss_kind", "L_hat", "p_value", "B", "K_or_m", "permuted_losses", "predictions", "seeds"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["design"], "CV");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pvalue_matches_counting_formula(seed in 0u64..5_000, shift in 0.0f64..1.5, b in 19usize..60) {
        let s = gaussian_sample(30, 2, shift, seed);
        let r = run_cv_test(&s, &Algorithm::Ols, &CvOptions { k: 3, b, seed, ..CvOptions::default() }).unwrap();
        let count = r.permuted_losses.iter().filter(|&&l| l <= r.observed_loss).count();
        prop_assert_eq!(r.p_value, (1 + count) as f64 / (b + 1) as f64);
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn permutations_preserve_treated_count(seed in 0u64..5_000, n in 8usize..60) {
        let s = gaussian_sample(n, 1, 0.0, seed);
        let plan = PermutationPlan::for_sample(&s, PermutationScope::FullSample, 10, seed).prepare(&s);
        for b in 1..=10 {
            let t = plan.draw(b);
            prop_assert_eq!(t.iter().filter(|&&v| v == 1).count(), s.n_treated());
        }
    }
}
