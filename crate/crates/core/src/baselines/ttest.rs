use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// Treated minus control mean.
    pub difference: f64,
    pub statistic: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_value: f64,
    pub n_treated: usize,
    pub n_control: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Two-sided unequal-variance t-test of `treated` against `control`.
///
/// When both arms have zero variance the test is degenerate: equal means
/// give p = 1 and different means give p = 0, both with a warning.
pub fn welch_t_test(treated: &[f64], control: &[f64]) -> Result<TTestResult> {
    let (n1, n0) = (treated.len(), control.len());
    if n1 < 2 || n0 < 2 {
        return Err(Error::DegenerateSample(format!(
            "t-test needs at least two observations per arm (treated {n1}, control {n0})"
        )));
    }
    let difference = stats::mean(treated) - stats::mean(control);
    let a = stats::variance(treated) / n1 as f64;
    let b = stats::variance(control) / n0 as f64;
    let se2 = a + b;
    if se2 <= 0.0 {
        let (statistic, p_value, warning) = if difference == 0.0 {
            (0.0, 1.0, "outcome has no variation")
        } else {
            (f64::INFINITY.copysign(difference), 0.0, "no within-arm variation but different means")
        };
        return Ok(TTestResult {
            difference,
            statistic,
            df: (n1 + n0 - 2) as f64,
            p_value,
            n_treated: n1,
            n_control: n0,
            warning: Some(warning.to_string()),
        });
    }
    let statistic = difference / se2.sqrt();
    let df = se2 * se2 / (a * a / (n1 as f64 - 1.0) + b * b / (n0 as f64 - 1.0));
    Ok(TTestResult {
        difference,
        statistic,
        df,
        p_value: stats::t_two_sided(statistic, df),
        n_treated: n1,
        n_control: n0,
        warning: None,
    })
}

/// Welch t-test for every outcome, each on its observed rows.
pub fn t_test_per_outcome(sample: &Sample) -> Result<Vec<TTestResult>> {
    let y = sample.outcomes();
    let t = sample.treatment();
    (0..sample.k())
        .map(|j| {
            let (mut treated, mut control) = (Vec::new(), Vec::new());
            for i in 0..sample.n() {
                if let Some(v) = y.get(i, j) {
                    if t[i] == 1 {
                        treated.push(v)
                    } else {
                        control.push(v)
                    }
                }
            }
            welch_t_test(&treated, &control)
        })
        .collect()
}
