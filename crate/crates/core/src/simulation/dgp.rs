use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Outcomes, Sample};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Attempts at drawing a treatment vector containing both arms.
const MAX_TREATMENT_DRAWS: u64 = 1000;

pub(crate) fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Draws Bernoulli(`p_treat`) treatment for `n` units and then the outcomes
/// via `outcomes(t, rng)`, redrawing everything until both arms occur.
pub(crate) fn draw_sample<F>(n: usize, p_treat: f64, seed: u64, names: &[&str], mut outcomes: F) -> Result<Sample>
where
    F: FnMut(u8, &mut ChaCha8Rng) -> Vec<f64>,
{
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need n >= 4, got {n}")));
    }
    if !(p_treat > 0.0 && p_treat < 1.0) {
        return Err(Error::InvalidArgument(format!("treatment probability must lie in (0, 1), got {p_treat}")));
    }
    let base = rng::derive(seed, tag::DGP);
    for attempt in 0..MAX_TREATMENT_DRAWS {
        let mut r = rng::stream(base, attempt);
        let t: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < p_treat)).collect();
        let treated = t.iter().filter(|&&v| v == 1).count();
        if treated == 0 || treated == n {
            continue;
        }
        let rows: Vec<Vec<f64>> = t.iter().map(|&ti| outcomes(ti, &mut r)).collect();
        let sample = Sample::new(Outcomes::from_rows(&rows)?, t)?;
        return sample.with_column_names(names.iter().map(|s| s.to_string()).collect());
    }
    Err(Error::DegenerateSample("could not draw both treatment arms".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveStretchConfig {
    pub n: usize,
    /// Shift of the treated mean along (1, 1).
    pub m: f64,
    /// Treated noise is scaled by `1 + s`.
    pub s: f64,
    pub p_treat: f64,
    pub seed: u64,
}

impl MoveStretchConfig {
    pub fn new(n: usize, m: f64, s: f64, seed: u64) -> Self {
        Self { n, m, s, p_treat: 0.5, seed }
    }
}

/// Two outcomes `Y = (1, 1)' T m + ε (1 + T s)` with `ε ~ N(0, I₂)`.
pub fn gen_move_stretch(config: &MoveStretchConfig) -> Result<Sample> {
    if !(config.s > -1.0) {
        return Err(Error::InvalidArgument(format!("stretch must exceed -1, got {}", config.s)));
    }
    let (m, s) = (config.m, config.s);
    draw_sample(config.n, config.p_treat, config.seed, &["Y1", "Y2"], |t, r| {
        let t = f64::from(t);
        (0..2).map(|_| t * m + normal(r) * (1.0 + t * s)).collect()
    })
}

/// Mean-shift model `Y = C + τ T + ε` with `ε ~ N(0, Σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub n: usize,
    pub tau: Vec<f64>,
    /// Noise covariance; empty means the identity.
    #[serde(default)]
    pub sigma: Vec<Vec<f64>>,
    /// Constant vector; empty means zeros.
    #[serde(default)]
    pub intercept: Vec<f64>,
    /// Scale the effect to `τ / √n` (local alternatives).
    #[serde(default)]
    pub local: bool,
    pub p_treat: f64,
    pub seed: u64,
}

pub fn gen_mean_shift(config: &MeanShiftConfig) -> Result<Sample> {
    let k = config.tau.len();
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one outcome".into()));
    }
    let sigma = if config.sigma.is_empty() {
        DMatrix::identity(k, k)
    } else {
        if config.sigma.len() != k || config.sigma.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(format!("sigma must be {k} x {k}")));
        }
        DMatrix::from_fn(k, k, |i, j| config.sigma[i][j])
    };
    let chol = sigma.cholesky().ok_or_else(|| Error::InvalidArgument("sigma must be positive definite".into()))?.l();
    let scale = if config.local { 1.0 / (config.n as f64).sqrt() } else { 1.0 };
    let tau: Vec<f64> = config.tau.iter().map(|v| v * scale).collect();
    let c = if config.intercept.is_empty() { vec![0.0; k] } else { config.intercept.clone() };
    if c.len() != k {
        return Err(Error::InvalidArgument("intercept length must match tau".into()));
    }
    let names: Vec<String> = (1..=k).map(|j| format!("Y{j}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    draw_sample(config.n, config.p_treat, config.seed, &names, |t, r| {
        let z = DVector::from_fn(k, |_, _| normal(r));
        let e = &chol * z;
        (0..k).map(|j| c[j] + tau[j] * f64::from(t) + e[j]).collect()
    })
}

/// One-factor model: `L = μ T + δ`, `Y_j = λ_j L + η_j` with
/// `δ ~ N(0, 1)` and `η_j ~ N(0, ν²_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorConfig {
    pub n: usize,
    pub mu: f64,
    pub loadings: Vec<f64>,
    pub noise_variances: Vec<f64>,
    pub p_treat: f64,
    pub seed: u64,
}

pub fn gen_one_factor(config: &FactorConfig) -> Result<Sample> {
    let k = config.loadings.len();
    if k == 0 || config.noise_variances.len() != k || config.noise_variances.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("need one positive noise variance per loading".into()));
    }
    let sd: Vec<f64> = config.noise_variances.iter().map(|v| v.sqrt()).collect();
    let names: Vec<String> = (1..=k).map(|j| format!("Y{j}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    draw_sample(config.n, config.p_treat, config.seed, &names, |t, r| {
        let latent = config.mu * f64::from(t) + normal(r);
        (0..k).map(|j| config.loadings[j] * latent + sd[j] * normal(r)).collect()
    })
}
