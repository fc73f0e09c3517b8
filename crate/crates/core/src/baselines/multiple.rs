use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    Holm,
    Sidak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleComparison {
    pub method: Correction,
    pub alpha: f64,
    /// Rejection of the joint null that no outcome is affected.
    pub reject_joint: bool,
    /// Smallest raw p-value must fall strictly below this to reject jointly.
    pub threshold: f64,
    /// Adjusted p-values in input order.
    pub adjusted: Vec<f64>,
    /// Per-hypothesis rejections in input order.
    pub rejected: Vec<bool>,
}

impl MultipleComparison {
    /// Joint p-value: the smallest adjusted p-value.
    pub fn joint_p_value(&self) -> f64 {
        self.adjusted.iter().copied().fold(1.0, f64::min)
    }
}

/// Corrects `p_values` for testing `k` hypotheses at once.
///
/// * Bonferroni: threshold `α/k`, adjusted `min(1, k p)`.
/// * Holm: step-down; the joint decision equals Bonferroni's.
/// * Šidák: threshold `1 − (1 − α)^{1/k}`, adjusted `1 − (1 − p)^k`.
pub fn multiple_comparison(p_values: &[f64], method: Correction, alpha: f64) -> Result<MultipleComparison> {
    if p_values.is_empty() {
        return Err(Error::InvalidArgument("no p-values to correct".into()));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("p-values must lie in [0, 1]".into()));
    }
    let k = p_values.len();
    let kf = k as f64;
    let min_p = p_values.iter().copied().fold(1.0, f64::min);
    let (threshold, adjusted, rejected) = match method {
        Correction::Bonferroni => {
            let threshold = alpha / kf;
            let adjusted = p_values.iter().map(|&p| (kf * p).min(1.0)).collect();
            (threshold, adjusted, p_values.iter().map(|&p| p < threshold).collect())
        }
        Correction::Sidak => {
            let threshold = 1.0 - (1.0 - alpha).powf(1.0 / kf);
            let adjusted = p_values.iter().map(|&p| 1.0 - (1.0 - p).powi(k as i32)).collect();
            (threshold, adjusted, p_values.iter().map(|&p| p < threshold).collect())
        }
        Correction::Holm => {
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
            let mut adjusted = vec![0.0; k];
            let mut rejected = vec![false; k];
            let mut running = 0.0f64;
            let mut still_rejecting = true;
            for (step, &i) in order.iter().enumerate() {
                let factor = (k - step) as f64;
                running = running.max((factor * p_values[i]).min(1.0));
                adjusted[i] = running;
                still_rejecting = still_rejecting && p_values[i] < alpha / factor;
                rejected[i] = still_rejecting;
            }
            (alpha / kf, adjusted, rejected)
        }
    };
    Ok(MultipleComparison { method, alpha, reject_joint: min_p < threshold, threshold, adjusted, rejected })
}
