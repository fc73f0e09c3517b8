mod common;

use common::{assert_close, gaussian_sample, rng};
use nalgebra::{DMatrix, DVector};
use predtest::baselines::{
    fixed_index_test, multiple_comparison, sur_wald_test, sur_wald_test_with, t_test_per_outcome, welch_t_test,
    Correction, IndexSpec, WaldOptions,
};
use predtest::simulation::{gen_mean_shift, MeanShiftConfig};
use predtest::{Outcomes, Sample};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// SUR Wald statistic from the stacked normal equations of `Y_j` on `(1, T)`.
fn wald_oracle(s: &Sample) -> f64 {
    let n = s.n();
    let k = s.k();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { f64::from(s.treatment()[i]) });
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let y = DMatrix::from_fn(n, k, |i, j| s.outcomes().raw(i, j));
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let sigma = resid.transpose() * &resid / (n - 2) as f64;
    let v = sigma * xtx_inv[(1, 1)];
    let tau = DVector::from_fn(k, |j, _| beta[(1, j)]);
    (tau.transpose() * v.try_inverse().unwrap() * &tau)[(0, 0)]
}

fn random_sample(seed: u64) -> Sample {
    let mut r = rng(seed);
    let n = r.random_range(12..80);
    let k = r.random_range(1..5);
    let mut t: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.5)).collect();
    t[0] = 0;
    t[1] = 1;
    let shift: Vec<f64> = (0..k).map(|_| r.random::<f64>() - 0.5).collect();
    let rows: Vec<Vec<f64>> = t
        .iter()
        .map(|&ti| {
            let common: f64 = r.sample(StandardNormal);
            (0..k)
                .map(|j| {
                    let e: f64 = r.sample(StandardNormal);
                    0.6 * common + e + shift[j] * f64::from(ti)
                })
                .collect()
        })
        .collect();
    Sample::new(Outcomes::from_rows(&rows).unwrap(), t).unwrap()
}

#[test]
fn wald_statistic_matches_normal_equations() {
    for seed in 0..100 {
        let s = random_sample(seed);
        let w = sur_wald_test(&s).unwrap();
        let oracle = wald_oracle(&s);
        assert!((w.statistic - oracle).abs() <= 1e-8 * oracle.abs().max(1e-300), "seed {seed}");
        let chi = ChiSquared::new(s.k() as f64).unwrap();
        assert_close(w.p_value, 1.0 - chi.cdf(oracle), 1e-8);
        assert_eq!(w.df, s.k());
    }
}

#[test]
fn wald_small_sample_reference() {
    let s = random_sample(3);
    let w = sur_wald_test_with(&s, WaldOptions { small_sample: true }).unwrap();
    let (f, d1, d2) = w.f_test.unwrap();
    let (n, k) = (s.n() as f64, s.k() as f64);
    assert_close(f, w.statistic * (n - k - 1.0) / (k * (n - 2.0)), 1e-12);
    assert_eq!((d1, d2), (s.k(), s.n() - s.k() - 1));
    assert!(w.p_value > sur_wald_test(&s).unwrap().p_value);
}

#[test]
fn duplicated_arms_give_zero_statistic() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), f64::from(i * i % 7)]).collect();
    let all: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
    let t: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    let w = sur_wald_test(&Sample::new(Outcomes::from_rows(&all).unwrap(), t).unwrap()).unwrap();
    assert_eq!(w.statistic, 0.0);
    assert_eq!(w.p_value, 1.0);
}

#[test]
fn collinear_outcomes_use_pseudo_inverse() {
    let s = gaussian_sample(40, 1, 0.5, 2);
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![s.outcomes().raw(i, 0), 2.0 * s.outcomes().raw(i, 0)]).collect();
    let dup = Sample::new(Outcomes::from_rows(&rows).unwrap(), s.treatment().to_vec()).unwrap();
    let w = sur_wald_test(&dup).unwrap();
    assert_eq!(w.df, 1);
    assert!(w.warnings.iter().any(|m| m.contains("pseudo-inverse")));
    assert_close(w.statistic, sur_wald_test(&s).unwrap().statistic, 1e-8);
}

#[test]
fn welch_matches_hand_computation() {
    let treated = [5.0, 6.0, 7.0, 9.0];
    let control = [1.0, 2.0, 4.0];
    // Means 6.75 and 7/3; variances 35/12 and 7/3.
    let a: f64 = 35.0 / 12.0 / 4.0;
    let b: f64 = 7.0 / 3.0 / 3.0;
    let t = (6.75 - 7.0 / 3.0) / (a + b).sqrt();
    let df = (a + b).powi(2) / (a * a / 3.0 + b * b / 2.0);
    let r = welch_t_test(&treated, &control).unwrap();
    assert_close(r.statistic, t, 1e-12);
    assert_close(r.df, df, 1e-12);
    assert_close(r.p_value, predtest::stats::t_two_sided(t, df), 1e-12);
}

#[test]
fn t_tests_extremes() {
    let r = welch_t_test(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
    assert_eq!(r.p_value, 1.0);
    assert!(r.warning.is_some());
    let s = gaussian_sample(100, 1, 10.0, 3);
    assert!(t_test_per_outcome(&s).unwrap()[0].p_value < 1e-10);
}

#[test]
fn corrections_match_closed_forms() {
    let p = [0.01, 0.04, 0.03, 0.2, 0.5];
    let k = p.len() as f64;

    let b = multiple_comparison(&p, Correction::Bonferroni, 0.05).unwrap();
    assert!((b.threshold - 0.01).abs() < 1e-12);
    for (a, &pj) in b.adjusted.iter().zip(&p) {
        assert!((a - (k * pj).min(1.0)).abs() < 1e-12);
    }
    assert!(!b.reject_joint, "0.01 is not strictly below 0.01");

    let s = multiple_comparison(&p, Correction::Sidak, 0.05).unwrap();
    assert!((s.threshold - (1.0 - 0.95f64.powf(0.2))).abs() < 1e-12);
    assert!((s.threshold - 0.010206218313011495).abs() < 1e-12);
    for (a, &pj) in s.adjusted.iter().zip(&p) {
        assert!((a - (1.0 - (1.0 - pj).powi(5))).abs() < 1e-12);
    }
    assert!(s.reject_joint);

    // Holm: sorted p = 0.01, 0.03, 0.04, 0.2, 0.5 with factors 5..1, running max.
    let h = multiple_comparison(&p, Correction::Holm, 0.05).unwrap();
    let expected = [0.05, 0.12, 0.12, 0.4, 0.5];
    for (a, e) in h.adjusted.iter().zip(expected) {
        assert!((a - e).abs() < 1e-12, "{a} vs {e}");
    }
    assert_eq!(h.rejected, [false; 5]);
    assert!((h.threshold - 0.01).abs() < 1e-12);
}

#[test]
fn holm_steps_down() {
    let p = [0.001, 0.011, 0.02, 0.04];
    let h = multiple_comparison(&p, Correction::Holm, 0.05).unwrap();
    // 0.001 < 0.0125, 0.011 < 0.05/3, 0.02 < 0.025, 0.04 < 0.05.
    assert_eq!(h.rejected, [true, true, true, true]);
    let expected = [0.004, 0.033, 0.04, 0.04];
    for (a, e) in h.adjusted.iter().zip(expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn bonferroni_is_conservative_under_strong_correlation() {
    let mut rejections = 0;
    let reps = 4000;
    for r in 0..reps {
        let s = gen_mean_shift(&MeanShiftConfig {
            n: 60,
            tau: vec![0.0, 0.0],
            sigma: vec![vec![1.0, 0.9], vec![0.9, 1.0]],
            intercept: Vec::new(),
            local: false,
            p_treat: 0.5,
            seed: r,
        })
        .unwrap();
        let p: Vec<f64> = t_test_per_outcome(&s).unwrap().iter().map(|t| t.p_value).collect();
        rejections += usize::from(multiple_comparison(&p, Correction::Bonferroni, 0.05).unwrap().reject_joint);
    }
    let rate = rejections as f64 / reps as f64;
    assert!(rate < 0.045, "rejection rate {rate}");
}

#[test]
fn factor_index_weights() {
    let spec = IndexSpec::factor_weights(&[1.0, 2.0], &[0.5, 4.0]).unwrap();
    assert_eq!(spec.weights, vec![2.0, 0.5]);
    assert!(IndexSpec::new(vec![0.0, 0.0]).is_err());
    let s = gaussian_sample(80, 2, 1.0, 5);
    let r = fixed_index_test(&s, &IndexSpec::new(vec![1.0, 0.0]).unwrap()).unwrap();
    assert_close(r.test.p_value, t_test_per_outcome(&s).unwrap()[0].p_value, 1e-12);
}

proptest! {
    #[test]
    fn joint_decisions_are_nested(p in proptest::collection::vec(0.0f64..1.0, 1..8), alpha in 0.01f64..0.2) {
        let b = multiple_comparison(&p, Correction::Bonferroni, alpha).unwrap();
        let h = multiple_comparison(&p, Correction::Holm, alpha).unwrap();
        let s = multiple_comparison(&p, Correction::Sidak, alpha).unwrap();
        prop_assert!(!b.reject_joint || h.reject_joint);
        prop_assert!(!h.reject_joint || s.reject_joint);
        prop_assert!(s.threshold >= b.threshold - 1e-15);
        for ((hb, hh), hs) in b.adjusted.iter().zip(&h.adjusted).zip(&s.adjusted) {
            prop_assert!(*hh <= *hb && *hs <= *hb + 1e-12);
        }
    }
}
