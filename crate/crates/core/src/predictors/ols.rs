//! Least-squares regression of the labels on an intercept and the features.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::features::Design;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// True when the centered design was rank deficient and the
    /// minimum-norm solution was used.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, design: &Design) -> Vec<f64> {
        let mut out = vec![self.intercept; design.n()];
        for (j, &b) in self.coefficients.iter().enumerate() {
            if b != 0.0 {
                for (o, &x) in out.iter_mut().zip(design.col(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }
}

/// Fits by SVD of the column-centered design, which gives the minimum-norm
/// slope vector when the design is rank deficient. The intercept then makes
/// residuals sum to zero.
pub fn fit(design: &Design, t: &[f64]) -> LinearModel {
    let n = design.n();
    let p = design.p();
    let t_mean = t.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return LinearModel { intercept: t_mean, coefficients: Vec::new(), rank_deficient: false };
    }
    let means: Vec<f64> = (0..p).map(|j| design.col(j).iter().sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, p, |i, j| design.get(i, j) - means[j]);
    let y = DMatrix::from_fn(n, 1, |i, _| t[i] - t_mean);

    let svd = x.svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = s_max * (n.max(p) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let coefficients: Vec<f64> = if rank == 0 {
        vec![0.0; p]
    } else {
        svd.solve(&y, eps).map(|b| b.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; p])
    };
    let intercept = t_mean - coefficients.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    LinearModel { intercept, coefficients, rank_deficient: rank < p }
}
