use serde::{Deserialize, Serialize};

use super::listwise;
use super::ttest::{welch_t_test, TTestResult};
use crate::data::Sample;
use crate::error::{Error, Result};

/// Weights of a linear outcome index `I = Σ w_j Y_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub weights: Vec<f64>,
}

impl IndexSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().all(|&w| w == 0.0) || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("index weights must be finite with one nonzero".into()));
        }
        Ok(Self { weights })
    }

    /// Weights `λ_j / ν²_j` for outcomes loading `λ_j` on a common factor
    /// with idiosyncratic noise variance `ν²_j`.
    pub fn factor_weights(loadings: &[f64], noise_variances: &[f64]) -> Result<Self> {
        if loadings.len() != noise_variances.len() || noise_variances.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument("need one positive noise variance per loading".into()));
        }
        Self::new(loadings.iter().zip(noise_variances).map(|(l, v)| l / v).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTestResult {
    pub weights: Vec<f64>,
    pub test: TTestResult,
    pub n_dropped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Welch t-test of the treatment-control difference in the index.
pub fn fixed_index_test(sample: &Sample, spec: &IndexSpec) -> Result<IndexTestResult> {
    if spec.weights.len() != sample.k() {
        return Err(Error::Shape { expected: sample.k(), actual: spec.weights.len() });
    }
    let (rows, n_dropped) = listwise(sample);
    let y = sample.outcomes();
    let t = sample.treatment();
    let (mut treated, mut control) = (Vec::new(), Vec::new());
    for &i in &rows {
        let index: f64 = spec.weights.iter().enumerate().map(|(j, w)| w * y.raw(i, j)).sum();
        if t[i] == 1 {
            treated.push(index)
        } else {
            control.push(index)
        }
    }
    Ok(IndexTestResult {
        weights: spec.weights.clone(),
        test: welch_t_test(&treated, &control)?,
        n_dropped,
        warning: (n_dropped > 0).then(|| format!("listwise deletion dropped {n_dropped} rows with missing outcomes")),
    })
}
