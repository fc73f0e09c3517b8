use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dgp::{gen_move_stretch, MoveStretchConfig};
use crate::baselines::{multiple_comparison, sur_wald_test, t_test_per_outcome, Correction};
use crate::data::{FoldMode, Sample};
use crate::error::{Error, Result};
use crate::predictors::Algorithm;
use crate::rng::{self, tag};
use crate::testing::{run_cv_test, run_holdout_test, CvOptions, HoldoutOptions, Loss};

/// A test applied in every replication of a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum PowerTest {
    Wald,
    /// Per-outcome Welch t-tests with a correction; the joint p-value is the
    /// smallest adjusted p-value.
    Bonferroni,
    Holm,
    Sidak,
    Holdout {
        algorithm: Algorithm,
        train_fraction: f64,
        b: usize,
    },
    Cv {
        algorithm: Algorithm,
        k: usize,
        b: usize,
    },
}

impl PowerTest {
    pub fn name(&self) -> String {
        match self {
            PowerTest::Wald => "wald".into(),
            PowerTest::Bonferroni => "bonferroni".into(),
            PowerTest::Holm => "holm".into(),
            PowerTest::Sidak => "sidak".into(),
            PowerTest::Holdout { algorithm, .. } => format!("holdout_{}", algorithm.label()),
            PowerTest::Cv { algorithm, .. } => format!("cv_{}", algorithm.label()),
        }
    }

    /// p-value of the test on `sample`; `seed` drives splits, folds, fits
    /// and permutations.
    pub fn p_value(&self, sample: &Sample, seed: u64) -> Result<f64> {
        let corrected = |method| -> Result<f64> {
            let p: Vec<f64> = t_test_per_outcome(sample)?.iter().map(|r| r.p_value).collect();
            Ok(multiple_comparison(&p, method, 0.05)?.joint_p_value())
        };
        match self {
            PowerTest::Wald => Ok(sur_wald_test(sample)?.p_value),
            PowerTest::Bonferroni => corrected(Correction::Bonferroni),
            PowerTest::Holm => corrected(Correction::Holm),
            PowerTest::Sidak => corrected(Correction::Sidak),
            PowerTest::Holdout { algorithm, train_fraction, b } => {
                let options = HoldoutOptions {
                    train_fraction: *train_fraction,
                    b: *b,
                    loss: Loss::SquaredError,
                    seed,
                    workers: 1,
                };
                Ok(run_holdout_test(sample, algorithm, &options)?.p_value)
            }
            PowerTest::Cv { algorithm, k, b } => {
                let options = CvOptions {
                    k: *k,
                    b: *b,
                    loss: Loss::SquaredError,
                    seed,
                    fold_mode: FoldMode::Stratified,
                    workers: 1,
                    shortcuts: true,
                };
                Ok(run_cv_test(sample, algorithm, &options)?.p_value)
            }
        }
    }
}

/// Outcomes of one test over all replications of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSeries {
    pub test: String,
    /// p-values of the successful replications, in replication order.
    pub p_values: Vec<f64>,
    pub failures: usize,
    /// Share of successful replications with `p <= alpha`.
    pub rejection_rate: f64,
    /// Monte Carlo standard error `sqrt(f (1 − f) / R)`.
    pub se: f64,
    /// Successful replications.
    pub replications: usize,
}

impl TestSeries {
    fn new(test: String, p_values: Vec<f64>, failures: usize, alpha: f64) -> Self {
        let r = p_values.len();
        let f = if r == 0 { 0.0 } else { p_values.iter().filter(|&&p| p <= alpha).count() as f64 / r as f64 };
        let se = if r == 0 { 0.0 } else { (f * (1.0 - f) / r as f64).sqrt() };
        Self { test, p_values, failures, rejection_rate: f, se, replications: r }
    }
}

/// Applies every test to `replications` samples drawn by `generate(seed)`.
///
/// Replication `r` draws its sample with seed `derive(derive(seed,
/// REPLICATION), r)` and runs the tests with a seed derived from that, so
/// results do not depend on `workers` or on which other tests are run.
pub fn run_replications<G>(
    generate: G,
    replications: usize,
    tests: &[PowerTest],
    alpha: f64,
    seed: u64,
    workers: usize,
) -> Result<Vec<TestSeries>>
where
    G: Fn(u64) -> Result<Sample> + Sync + Send,
{
    let base = rng::derive(seed, tag::REPLICATION);
    let rows: Vec<Vec<Option<f64>>> = crate::testing::run_indexed(workers, replications, |r| {
        let data_seed = rng::derive(base, r as u64);
        let test_seed = rng::derive(data_seed, tag::TEST);
        Ok(match generate(data_seed) {
            Ok(sample) => tests.iter().map(|t| t.p_value(&sample, test_seed).ok()).collect(),
            Err(_) => vec![None; tests.len()],
        })
    })?;
    Ok(tests
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let p: Vec<f64> = rows.iter().filter_map(|row| row[j]).collect();
            let failures = replications - p.len();
            TestSeries::new(t.name(), p, failures, alpha)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    /// `(m, s)` cells.
    pub grid: Vec<(f64, f64)>,
    pub n: usize,
    pub replications: usize,
    pub tests: Vec<PowerTest>,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default = "half")]
    pub p_treat: f64,
    #[serde(default = "one")]
    pub workers: usize,
}

fn half() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

/// Smallest replication count accepted by [`run_power_study`].
pub const MIN_REPLICATIONS: usize = 50;

/// The move/stretch grid with `m, s ∈ {0, 0.1, …, 0.5}`.
pub fn move_stretch_grid() -> Vec<(f64, f64)> {
    let values: Vec<f64> = (0..=5).map(|i| f64::from(i) / 10.0).collect();
    values.iter().flat_map(|&m| values.iter().map(move |&s| (m, s))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub m: f64,
    pub s: f64,
    pub series: Vec<TestSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub config: PowerStudyConfig,
    pub cells: Vec<PowerCell>,
}

/// Power of each test on the move/stretch design at every grid cell.
///
/// Replication `r` uses the same data seed in every cell, so cells differ
/// only through `(m, s)`.
pub fn run_power_study(config: &PowerStudyConfig) -> Result<PowerTable> {
    if config.replications < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICATIONS} replications, got {}",
            config.replications
        )));
    }
    if config.tests.is_empty() || config.grid.is_empty() {
        return Err(Error::InvalidArgument("need at least one test and one grid cell".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    let cells = config
        .grid
        .iter()
        .map(|&(m, s)| {
            let generate =
                |seed| gen_move_stretch(&MoveStretchConfig { n: config.n, m, s, p_treat: config.p_treat, seed });
            let series = run_replications(
                generate,
                config.replications,
                &config.tests,
                config.alpha,
                config.seed,
                config.workers,
            )?;
            Ok(PowerCell { m, s, series })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTable { config: config.clone(), cells })
}

impl PowerTable {
    /// CSV with a leading `# config:` comment holding the JSON config.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!("# config: {}\n", serde_json::to_string(&self.config)?);
        out.push_str("m,s,test,rejection_rate,se,R\n");
        for cell in &self.cells {
            for t in &cell.series {
                let _ =
                    writeln!(out, "{},{},{},{},{},{}", cell.m, cell.s, t.test, t.rejection_rate, t.se, t.replications);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn series(&self, m: f64, s: f64, test: &str) -> Option<&TestSeries> {
        self.cells
            .iter()
            .find(|c| (c.m - m).abs() < 1e-12 && (c.s - s).abs() < 1e-12)
            .and_then(|c| c.series.iter().find(|t| t.test == test))
    }
}

/// Empirical CDF of one test's p-values in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfSeries {
    pub cell: String,
    pub test: String,
    /// `(p, share of p-values <= p)` at every distinct p-value, ascending.
    pub points: Vec<(f64, f64)>,
}

impl EcdfSeries {
    pub fn from_p_values(cell: String, test: String, p_values: &[f64]) -> Self {
        let mut sorted = p_values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let r = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &p) in sorted.iter().enumerate() {
            let share = (i + 1) as f64 / r;
            match points.last_mut() {
                Some(last) if last.0 == p => last.1 = share,
                _ => points.push((p, share)),
            }
        }
        Self { cell, test, points }
    }

    /// ECDF value at `x`.
    pub fn at(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|&(p, _)| p <= x);
        if i == 0 {
            0.0
        } else {
            self.points[i - 1].1
        }
    }
}

pub fn pvalue_ecdf(table: &PowerTable) -> Vec<EcdfSeries> {
    table
        .cells
        .iter()
        .flat_map(|cell| {
            cell.series.iter().map(move |t| {
                EcdfSeries::from_p_values(format!("m={};s={}", cell.m, cell.s), t.test.clone(), &t.p_values)
            })
        })
        .collect()
}

pub fn ecdf_csv(series: &[EcdfSeries]) -> String {
    let mut out = String::from("cell,test,p,ecdf\n");
    for s in series {
        for &(p, f) in &s.points {
            let _ = writeln!(out, "{},{},{p},{f}", s.cell, s.test);
        }
    }
    out
}
