//! Structural examples of treatments acting on a group of outcomes. All
//! disturbances are independent standard Normal; only the observed outcome
//! columns are emitted.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dgp::{draw_sample, normal};
use crate::data::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `Y_B ~ N(0,1)`, `Y_A = A0 + α Y_B + β T Y_B + ε_A`. Observed
    /// `(Y_A, Y_B)`.
    BreakLink,
    /// `H = H0 + β Y_B + ε_H`, `Y_A = A0 + α T H + ε_A`, `Y_B ~ N(0,1)`.
    /// Observed `(Y_A, Y_B)`.
    CreateCorrelation,
    /// `M = M0 + τ T + ε_M`, `P ~ U(0,1)`, `Y_H = P M + ε_H`,
    /// `Y_E = (1 − P) M + ε_E`. Observed `(Y_H, Y_E)`.
    Budget,
    /// `S = S0 + τ T + ε_S`, `Y_C = C0 + γ S + ε_C`, `Y_A = A0 + α Y_C + ε_A`.
    /// Observed `(Y_C, Y_A)`.
    CausalChain,
    /// `Y_E = E0 + τ_E T + ε_E`, `Q = Q0 + τ_Q T + α Y_E + ε_Q`,
    /// `Y_S = S0 + β Q + ε_S`. Observed `(Y_E, Y_S)`.
    TwoPaths,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "break_link" => Preset::BreakLink,
            "create_correlation" => Preset::CreateCorrelation,
            "budget" => Preset::Budget,
            "causal_chain" => Preset::CausalChain,
            "two_paths" => Preset::TwoPaths,
            other => return Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        })
    }
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::BreakLink, Preset::CreateCorrelation, Preset::Budget, Preset::CausalChain, Preset::TwoPaths];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BreakLink => "break_link",
            Preset::CreateCorrelation => "create_correlation",
            Preset::Budget => "budget",
            Preset::CausalChain => "causal_chain",
            Preset::TwoPaths => "two_paths",
        }
    }

    /// Parameter names with their default values. Every preset also accepts
    /// `p_treat` (default 0.5).
    pub fn defaults(self) -> BTreeMap<&'static str, f64> {
        let pairs: &[(&str, f64)] = match self {
            Preset::BreakLink => &[("a0", 0.0), ("alpha", 0.5), ("beta", -0.5)],
            Preset::CreateCorrelation => &[("h0", 0.0), ("beta", 1.0), ("a0", 0.0), ("alpha", -0.5)],
            Preset::Budget => &[("m0", 1.0), ("tau", 0.5)],
            Preset::CausalChain => {
                &[("s0", 0.0), ("tau", 0.5), ("c0", 0.0), ("gamma", 1.0), ("a0", 0.0), ("alpha", 0.5)]
            }
            Preset::TwoPaths => {
                &[("e0", 0.0), ("tau_e", 0.3), ("q0", 0.0), ("tau_q", 0.3), ("alpha", 0.5), ("s0", 0.0), ("beta", 1.0)]
            }
        };
        let mut map: BTreeMap<&'static str, f64> = pairs.iter().copied().collect();
        map.insert("p_treat", 0.5);
        map
    }

    pub fn columns(self) -> [&'static str; 2] {
        match self {
            Preset::BreakLink | Preset::CreateCorrelation => ["Y_A", "Y_B"],
            Preset::Budget => ["Y_H", "Y_E"],
            Preset::CausalChain => ["Y_C", "Y_A"],
            Preset::TwoPaths => ["Y_E", "Y_S"],
        }
    }
}

/// Draws `n` units from a preset, with `params` overriding defaults.
pub fn gen_example_preset(preset: Preset, n: usize, params: &BTreeMap<String, f64>, seed: u64) -> Result<Sample> {
    let mut v = preset.defaults();
    for (key, &value) in params {
        match v.get_mut(key.as_str()) {
            Some(slot) => *slot = value,
            None => return Err(Error::InvalidArgument(format!("preset '{}' has no parameter '{key}'", preset.name()))),
        }
    }
    let g = |k: &str| v[k];
    let p_treat = g("p_treat");
    draw_sample(n, p_treat, seed, &preset.columns(), |t, r| {
        let t = f64::from(t);
        match preset {
            Preset::BreakLink => {
                let yb = normal(r);
                let ya = g("a0") + g("alpha") * yb + g("beta") * t * yb + normal(r);
                vec![ya, yb]
            }
            Preset::CreateCorrelation => {
                let yb = normal(r);
                let h = g("h0") + g("beta") * yb + normal(r);
                let ya = g("a0") + g("alpha") * t * h + normal(r);
                vec![ya, yb]
            }
            Preset::Budget => {
                let m = g("m0") + g("tau") * t + normal(r);
                let p: f64 = r.random();
                vec![p * m + normal(r), (1.0 - p) * m + normal(r)]
            }
            Preset::CausalChain => {
                let s = g("s0") + g("tau") * t + normal(r);
                let yc = g("c0") + g("gamma") * s + normal(r);
                let ya = g("a0") + g("alpha") * yc + normal(r);
                vec![yc, ya]
            }
            Preset::TwoPaths => {
                let ye = g("e0") + g("tau_e") * t + normal(r);
                let q = g("q0") + g("tau_q") * t + g("alpha") * ye + normal(r);
                let ys = g("s0") + g("beta") * q + normal(r);
                vec![ye, ys]
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let mut params = BTreeMap::new();
        params.insert("gamma".to_string(), 1.0);
        assert!(gen_example_preset(Preset::BreakLink, 20, &params, 0).is_err());
        params.clear();
        params.insert("beta".to_string(), 0.0);
        let s = gen_example_preset(Preset::BreakLink, 20, &params, 0).unwrap();
        assert_eq!(s.column_names(), ["Y_A", "Y_B"]);
    }
}
