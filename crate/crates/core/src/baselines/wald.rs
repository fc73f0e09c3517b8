use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::listwise;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WaldOptions {
    /// Use the F reference distribution (Hotelling's T² conversion) instead
    /// of the chi-square.
    pub small_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub design: String,
    /// Wald chi-square statistic `τ̂' V̂⁻¹ τ̂`.
    pub statistic: f64,
    /// Degrees of freedom of the chi-square reference (rank of `V̂`).
    pub df: usize,
    pub p_value: f64,
    /// Treated minus control mean, per outcome.
    pub tau_hat: Vec<f64>,
    /// Estimated covariance matrix `V̂` of `tau_hat`, row-major.
    pub covariance: Vec<Vec<f64>>,
    /// F statistic and degrees of freedom, when the small-sample reference
    /// was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_test: Option<(f64, usize, usize)>,
    pub n_used: usize,
    pub n_dropped: usize,
    pub warnings: Vec<String>,
}

impl WaldResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

pub fn sur_wald_test(sample: &Sample) -> Result<WaldResult> {
    sur_wald_test_with(sample, WaldOptions::default())
}

/// Joint Wald test that every outcome has the same mean under treatment and
/// control.
///
/// With the same regressors `(1, T)` in every equation, seemingly unrelated
/// regression reduces to equation-by-equation least squares: `τ̂` is the
/// vector of mean differences and its covariance is
/// `Σ̂ (1/n₁ + 1/n₀)`, where `Σ̂` is the residual covariance with divisor
/// `n − 2`. A singular `V̂` is inverted by pseudo-inverse.
pub fn sur_wald_test_with(sample: &Sample, options: WaldOptions) -> Result<WaldResult> {
    let (rows, n_dropped) = listwise(sample);
    let mut warnings = Vec::new();
    if n_dropped > 0 {
        warnings.push(format!("listwise deletion dropped {n_dropped} rows with missing outcomes"));
    }
    let k = sample.k();
    let n = rows.len();
    let t = sample.treatment();
    let n1 = rows.iter().filter(|&&i| t[i] == 1).count();
    let n0 = n - n1;
    if n <= k + 2 || n1 == 0 || n0 == 0 {
        return Err(Error::DegenerateSample(format!(
            "Wald test needs n > k + 2 complete rows in both arms (n = {n}, k = {k}, treated = {n1})"
        )));
    }
    let y = sample.outcomes();
    let mut mean1 = vec![0.0; k];
    let mut mean0 = vec![0.0; k];
    for &i in &rows {
        let m = if t[i] == 1 { &mut mean1 } else { &mut mean0 };
        for (j, mj) in m.iter_mut().enumerate() {
            *mj += y.raw(i, j);
        }
    }
    mean1.iter_mut().for_each(|v| *v /= n1 as f64);
    mean0.iter_mut().for_each(|v| *v /= n0 as f64);
    let tau_hat: Vec<f64> = mean1.iter().zip(&mean0).map(|(a, b)| a - b).collect();

    let mut sigma = DMatrix::<f64>::zeros(k, k);
    for &i in &rows {
        let m = if t[i] == 1 { &mean1 } else { &mean0 };
        let e = DVector::from_fn(k, |j, _| y.raw(i, j) - m[j]);
        sigma += &e * e.transpose();
    }
    sigma /= (n - 2) as f64;
    let v = sigma * (1.0 / n1 as f64 + 1.0 / n0 as f64);

    let tau = DVector::from_column_slice(&tau_hat);
    let svd = v.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * k as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let statistic = if rank == 0 {
        warnings.push("covariance of mean differences is zero".to_string());
        if tau.iter().all(|&d| d == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        if rank < k {
            warnings.push(format!("singular covariance (rank {rank} of {k}); pseudo-inverse used"));
        }
        let pinv = svd.pseudo_inverse(tol).map_err(|e| Error::Fit(e.to_string()))?;
        (tau.transpose() * pinv * &tau)[(0, 0)].max(0.0)
    };
    let df = rank.max(1);
    let (p_value, f_test) = if options.small_sample {
        let (d1, d2) = (df, n - df - 1);
        let f = statistic * d2 as f64 / (d1 as f64 * (n - 2) as f64);
        (stats::f_sf(f, d1 as f64, d2 as f64), Some((f, d1, d2)))
    } else {
        (stats::chi2_sf(statistic, df as f64), None)
    };
    Ok(WaldResult {
        design: "wald".to_string(),
        statistic,
        df,
        p_value,
        tau_hat,
        covariance: (0..k).map(|a| (0..k).map(|b| v[(a, b)]).collect()).collect(),
        f_test,
        n_used: n,
        n_dropped,
        warnings,
    })
}
