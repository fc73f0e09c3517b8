use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x k` outcome matrix with an explicit missingness mask.
///
/// Values are stored row-major. A missing cell keeps `0.0` in the value
/// buffer and `true` in the mask; readers must go through the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcomes {
    n: usize,
    k: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Outcomes {
    /// Complete (no missing cells) matrix from row-major values.
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::with_missing(n, k, values, missing)
    }

    pub fn with_missing(n: usize, k: usize, mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if values.len() != n * k || missing.len() != n * k {
            return Err(Error::InvalidArgument(format!(
                "outcome buffer of length {} (mask {}) does not match {n} x {k}",
                values.len(),
                missing.len()
            )));
        }
        for (v, &m) in values.iter_mut().zip(&missing) {
            if m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::InvalidArgument(
                    "outcome values must be finite; record missing cells in the mask".into(),
                ));
            }
        }
        Ok(Self { n, k, values, missing })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged outcome rows".into()));
        }
        Self::new(rows.len(), k, rows.concat())
    }

    /// Build from rows of optional cells (`None` = missing).
    pub fn from_optional_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged outcome rows".into()));
        }
        let values = rows.iter().flatten().map(|c| c.unwrap_or(0.0)).collect();
        let missing = rows.iter().flatten().map(Option::is_none).collect();
        Self::with_missing(rows.len(), k, values, missing)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = i * self.k + j;
        (!self.missing[idx]).then(|| self.values[idx])
    }

    /// Raw stored value; `0.0` for missing cells.
    #[inline]
    pub fn raw(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    #[inline]
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn column_has_missing(&self, j: usize) -> bool {
        (0..self.n).any(|i| self.is_missing(i, j))
    }

    /// Observed values of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).filter_map(|i| self.get(i, j)).collect()
    }

    /// Rows with no missing cell.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| (0..self.k).all(|j| !self.is_missing(i, j))).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Outcomes {
        let mut values = Vec::with_capacity(rows.len() * self.k);
        let mut missing = Vec::with_capacity(rows.len() * self.k);
        for &i in rows {
            values.extend_from_slice(self.row(i));
            missing.extend_from_slice(&self.missing[i * self.k..(i + 1) * self.k]);
        }
        Outcomes { n: rows.len(), k: self.k, values, missing }
    }

    /// Append columns (all complete) to the right of the matrix.
    pub fn append_columns(&self, columns: &[Vec<f64>]) -> Result<Outcomes> {
        if columns.iter().any(|c| c.len() != self.n) {
            return Err(Error::InvalidArgument("appended column has wrong length".into()));
        }
        let k = self.k + columns.len();
        let mut values = Vec::with_capacity(self.n * k);
        let mut missing = Vec::with_capacity(self.n * k);
        for i in 0..self.n {
            values.extend_from_slice(self.row(i));
            missing.extend_from_slice(&self.missing[i * self.k..(i + 1) * self.k]);
            for c in columns {
                values.push(c[i]);
                missing.push(false);
            }
        }
        Outcomes::with_missing(self.n, k, values, missing)
    }
}

/// A randomization unit: a single observation, or a whole cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationUnit {
    pub rows: Vec<usize>,
    pub treatment: u8,
    pub stratum: usize,
}

/// Binary treatment plus `k` outcomes for `n` units, with optional cluster
/// and stratum labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    outcomes: Outcomes,
    treatment: Vec<u8>,
    clusters: Option<Vec<usize>>,
    strata: Option<Vec<usize>>,
    column_names: Vec<String>,
}

fn normalize_codes(codes: &[usize]) -> Vec<usize> {
    let mut seen = std::collections::HashMap::new();
    codes
        .iter()
        .map(|c| {
            let next = seen.len();
            *seen.entry(*c).or_insert(next)
        })
        .collect()
}

impl Sample {
    /// Validates `n >= 4`, `k >= 1`, binary labels and the presence of both
    /// treatment values.
    pub fn new(outcomes: Outcomes, treatment: Vec<u8>) -> Result<Self> {
        let sample = Self::unchecked(outcomes, treatment)?;
        sample.validate()?;
        Ok(sample)
    }

    /// Like [`Sample::new`] but without the size and two-class checks; used
    /// for sub-samples (hold-out parts, folds) which may be small.
    pub fn unchecked(outcomes: Outcomes, treatment: Vec<u8>) -> Result<Self> {
        if outcomes.n() != treatment.len() {
            return Err(Error::InvalidArgument(format!(
                "{} outcome rows but {} treatment labels",
                outcomes.n(),
                treatment.len()
            )));
        }
        if outcomes.k() == 0 {
            return Err(Error::InvalidArgument("at least one outcome column required".into()));
        }
        if let Some(bad) = treatment.iter().find(|&&t| t > 1) {
            return Err(Error::Schema(format!("treatment label {bad} is not 0/1")));
        }
        let column_names = (1..=outcomes.k()).map(|j| format!("Y{j}")).collect();
        Ok(Self { outcomes, treatment, clusters: None, strata: None, column_names })
    }

    fn validate(&self) -> Result<()> {
        if self.n() < 4 {
            return Err(Error::DegenerateSample(format!("n = {} < 4", self.n())));
        }
        let treated = self.n_treated();
        if treated == 0 || treated == self.n() {
            return Err(Error::DegenerateSample("treatment must contain both 0 and 1".into()));
        }
        Ok(())
    }

    /// Attach cluster labels. All units in a cluster must share treatment.
    pub fn with_clusters(mut self, clusters: Vec<usize>) -> Result<Self> {
        if clusters.len() != self.n() {
            return Err(Error::InvalidArgument("cluster labels have wrong length".into()));
        }
        let codes = normalize_codes(&clusters);
        let mut cluster_treatment: Vec<Option<u8>> = vec![None; codes.len()];
        for (i, &c) in codes.iter().enumerate() {
            match cluster_treatment[c] {
                None => cluster_treatment[c] = Some(self.treatment[i]),
                Some(t) if t != self.treatment[i] => {
                    return Err(Error::Schema(format!(
                        "cluster {} contains both treated and control units",
                        clusters[i]
                    )))
                }
                _ => {}
            }
        }
        self.clusters = Some(codes);
        self.check_clusters_in_strata()?;
        Ok(self)
    }

    pub fn with_strata(mut self, strata: Vec<usize>) -> Result<Self> {
        if strata.len() != self.n() {
            return Err(Error::InvalidArgument("stratum labels have wrong length".into()));
        }
        self.strata = Some(normalize_codes(&strata));
        self.check_clusters_in_strata()?;
        Ok(self)
    }

    fn check_clusters_in_strata(&self) -> Result<()> {
        if let (Some(c), Some(s)) = (&self.clusters, &self.strata) {
            let mut stratum_of = std::collections::HashMap::new();
            for (cl, st) in c.iter().zip(s) {
                if *stratum_of.entry(*cl).or_insert(*st) != *st {
                    return Err(Error::Schema("a cluster spans several strata".into()));
                }
            }
        }
        Ok(())
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k() {
            return Err(Error::InvalidArgument(format!("{} column names for {} outcomes", names.len(), self.k())));
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.outcomes.n()
    }

    pub fn k(&self) -> usize {
        self.outcomes.k()
    }

    pub fn outcomes(&self) -> &Outcomes {
        &self.outcomes
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    /// Treatment as `f64` regression targets.
    pub fn labels(&self) -> Vec<f64> {
        self.treatment.iter().map(|&t| f64::from(t)).collect()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn strata(&self) -> Option<&[usize]> {
        self.strata.as_deref()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Same units and structure, new treatment labels.
    pub fn with_treatment(&self, treatment: Vec<u8>) -> Sample {
        assert_eq!(treatment.len(), self.n(), "relabeling must keep n");
        Sample { treatment, ..self.clone() }
    }

    /// Sub-sample of the given rows, preserving order and structure.
    pub fn subset(&self, rows: &[usize]) -> Sample {
        let pick = |v: &Vec<usize>| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Sample {
            outcomes: self.outcomes.subset(rows),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            clusters: self.clusters.as_ref().map(pick),
            strata: self.strata.as_ref().map(pick),
            column_names: self.column_names.clone(),
        }
    }

    /// Units of randomization in order of first appearance: clusters when
    /// present, single observations otherwise.
    pub fn randomization_units(&self) -> Vec<RandomizationUnit> {
        let stratum = |i: usize| self.strata.as_ref().map_or(0, |s| s[i]);
        match &self.clusters {
            None => (0..self.n())
                .map(|i| RandomizationUnit { rows: vec![i], treatment: self.treatment[i], stratum: stratum(i) })
                .collect(),
            Some(codes) => {
                let mut index = std::collections::HashMap::new();
                let mut units: Vec<RandomizationUnit> = Vec::new();
                for (i, &c) in codes.iter().enumerate() {
                    let u = *index.entry(c).or_insert_with(|| {
                        units.push(RandomizationUnit {
                            rows: Vec::new(),
                            treatment: self.treatment[i],
                            stratum: stratum(i),
                        });
                        units.len() - 1
                    });
                    units[u].rows.push(i);
                }
                units
            }
        }
    }
}
