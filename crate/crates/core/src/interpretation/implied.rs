use serde::{Deserialize, Serialize};

use crate::data::Outcomes;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedEffect {
    /// Implied mean effect per outcome.
    pub tau_hat: Vec<f64>,
    /// Mean prediction over all rows.
    pub mean_prediction: f64,
    /// Rows used per outcome (rows where the outcome is observed).
    pub n_used: Vec<usize>,
    /// Implied effect on a user-supplied function of the outcomes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_effect: Option<f64>,
}

/// `(1/n) Σ (T̂_i − p̄)/(p̄(1 − p̄)) g_i` with `p̄` the mean of `predictions`.
pub fn implied_effect_of(predictions: &[f64], g: &[f64]) -> Result<f64> {
    if predictions.len() != g.len() || predictions.is_empty() {
        return Err(Error::InvalidArgument("need one prediction per value".into()));
    }
    let n = predictions.len() as f64;
    let p = predictions.iter().sum::<f64>() / n;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Undefined(format!("mean prediction {p} is not inside (0, 1)")));
    }
    let scale = p * (1.0 - p);
    Ok(predictions.iter().zip(g).map(|(t, y)| (t - p) / scale * y).sum::<f64>() / n)
}

/// Implied average-effect vector. Each outcome uses the rows where it is
/// observed, with the mean prediction taken over those rows.
pub fn implied_ate(predictions: &[f64], outcomes: &Outcomes) -> Result<ImpliedEffect> {
    if predictions.len() != outcomes.n() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} rows", predictions.len(), outcomes.n())));
    }
    let mean_prediction = predictions.iter().sum::<f64>() / predictions.len().max(1) as f64;
    if !(mean_prediction > 0.0 && mean_prediction < 1.0) {
        return Err(Error::Undefined(format!("mean prediction {mean_prediction} is not inside (0, 1)")));
    }
    let mut tau_hat = Vec::with_capacity(outcomes.k());
    let mut n_used = Vec::with_capacity(outcomes.k());
    for j in 0..outcomes.k() {
        let (t, y): (Vec<f64>, Vec<f64>) =
            (0..outcomes.n()).filter_map(|i| outcomes.get(i, j).map(|v| (predictions[i], v))).unzip();
        n_used.push(t.len());
        tau_hat.push(implied_effect_of(&t, &y)?);
    }
    Ok(ImpliedEffect { tau_hat, mean_prediction, n_used, g_effect: None })
}

impl ImpliedEffect {
    /// Adds the implied effect on `g`, evaluated at every row.
    pub fn with_g(mut self, predictions: &[f64], g: &[f64]) -> Result<Self> {
        self.g_effect = Some(implied_effect_of(predictions, g)?);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    /// Treated minus control mean prediction.
    pub mean_diff: f64,
    /// `mean_diff` over the pooled within-arm standard deviation; 0 when that
    /// deviation is 0.
    pub standardized_diff: f64,
    pub zero_variance: bool,
}

/// Treatment-control difference in the predicted-treatment index.
pub fn index_summary(predictions: &[f64], treatment: &[u8]) -> Result<IndexSummary> {
    if predictions.len() != treatment.len() {
        return Err(Error::InvalidArgument("need one prediction per unit".into()));
    }
    let arm =
        |a: u8| -> Vec<f64> { predictions.iter().zip(treatment).filter(|(_, &t)| t == a).map(|(&p, _)| p).collect() };
    let (x1, x0) = (arm(1), arm(0));
    if x1.is_empty() || x0.is_empty() {
        return Err(Error::DegenerateSample("index summary needs both arms".into()));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
    };
    let mean_diff = mean(&x1) - mean(&x0);
    let dof = predictions.len() as f64 - 2.0;
    let pooled = if dof > 0.0 { ((ss(&x1) + ss(&x0)) / dof).sqrt() } else { 0.0 };
    let scale = predictions.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_variance = !(pooled > 1e-12 * scale);
    Ok(IndexSummary {
        mean_diff,
        standardized_diff: if zero_variance { 0.0 } else { mean_diff / pooled },
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_computation() {
        let y = Outcomes::new(2, 1, vec![0.0, 1.0]).unwrap();
        let e = implied_ate(&[0.25, 0.75], &y).unwrap();
        assert_eq!(e.mean_prediction, 0.5);
        assert!((e.tau_hat[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_predictions_imply_no_effect() {
        let y = Outcomes::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let e = implied_ate(&[0.4; 3], &y).unwrap();
        assert!(e.tau_hat.iter().all(|v| v.abs() < 1e-15));
        assert!(implied_ate(&[1.0; 3], &y).is_err());
        assert!(implied_ate(&[0.0; 3], &y).is_err());
    }

    #[test]
    fn index_summary_extremes() {
        let s = index_summary(&[0.3; 4], &[0, 1, 0, 1]).unwrap();
        assert_eq!(s.mean_diff, 0.0);
        assert!(s.zero_variance);
        let s = index_summary(&[0.0, 1.0, 0.0, 1.0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(s.mean_diff, 1.0);
    }
}
