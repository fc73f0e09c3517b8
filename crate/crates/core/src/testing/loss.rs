use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clipping applied to predictions before the log-likelihood loss.
pub const NLL_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    SquaredError,
    NegLogLikelihood,
}

impl Loss {
    #[inline]
    fn eval(self, t_hat: f64, t: f64) -> f64 {
        match self {
            Loss::SquaredError => (t_hat - t) * (t_hat - t),
            Loss::NegLogLikelihood => {
                let q = t_hat.clamp(NLL_CLIP, 1.0 - NLL_CLIP);
                -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
            }
        }
    }
}

/// Loss of a single prediction `t_hat` of label `t`. Log-likelihood
/// predictions are clipped to `[NLL_CLIP, 1 - NLL_CLIP]`.
pub fn pointwise_loss(loss: Loss, t_hat: f64, t: f64) -> Result<f64> {
    if t_hat.is_nan() || t.is_nan() {
        return Err(Error::InvalidArgument("loss of NaN".into()));
    }
    Ok(loss.eval(t_hat, t))
}

/// Mean loss of `predictions` against 0/1 `labels`.
pub fn mean_loss(loss: Loss, predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("mean loss over no predictions".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if predictions.iter().any(|p| p.is_nan()) {
        return Err(Error::InvalidArgument("NaN prediction".into()));
    }
    Ok(mean_loss_unchecked(loss, predictions, labels))
}

#[inline]
pub(crate) fn mean_loss_unchecked(loss: Loss, predictions: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = predictions.iter().zip(labels).map(|(&p, &t)| loss.eval(p, f64::from(t))).sum();
    total / predictions.len() as f64
}

/// `(1 + #{permuted <= observed}) / (B + 1)`. Lower loss is stronger
/// evidence, and ties count against rejection.
pub fn permutation_pvalue(observed: f64, permuted: &[f64]) -> f64 {
    let count = permuted.iter().filter(|&&l| l <= observed).count();
    (1 + count) as f64 / (permuted.len() + 1) as f64
}
