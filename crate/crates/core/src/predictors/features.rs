//! Conversion of outcome matrices (with missing cells) into dense,
//! column-major design matrices.

use serde::{Deserialize, Serialize};

use crate::data::Outcomes;
use crate::error::{Error, Result};

/// How missing outcome cells enter the feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingMode {
    /// Impute training column means and append a 0/1 missingness indicator
    /// for every column that had missing cells at fit time.
    #[default]
    ImputeWithIndicators,
    /// Use only the missingness indicators. Benchmarks how well treatment is
    /// predicted by missingness information alone.
    IndicatorsOnly,
}

/// Dense column-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn from_columns(n: usize, columns: Vec<Vec<f64>>) -> Self {
        debug_assert!(columns.iter().all(|c| c.len() == n));
        let p = columns.len();
        Self { n, p, data: columns.concat() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Design {
        let mut data = Vec::with_capacity(rows.len() * self.p);
        for j in 0..self.p {
            let c = self.col(j);
            data.extend(rows.iter().map(|&i| c[i]));
        }
        Design { n: rows.len(), p: self.p, data }
    }
}

/// Training-time imputation state, replayed at predict time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    k: usize,
    means: Vec<f64>,
    indicators: Vec<usize>,
    mode: MissingMode,
}

impl FeatureMap {
    pub fn fit(outcomes: &Outcomes, mode: MissingMode) -> Self {
        let k = outcomes.k();
        let means = (0..k)
            .map(|j| {
                let col = outcomes.column(j);
                if col.is_empty() {
                    0.0
                } else {
                    col.iter().sum::<f64>() / col.len() as f64
                }
            })
            .collect();
        let indicators = (0..k).filter(|&j| outcomes.column_has_missing(j)).collect();
        Self { k, means, indicators, mode }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> MissingMode {
        self.mode
    }

    /// Outcome columns that receive a missingness indicator.
    pub fn indicator_columns(&self) -> &[usize] {
        &self.indicators
    }

    pub fn width(&self) -> usize {
        match self.mode {
            MissingMode::ImputeWithIndicators => self.k + self.indicators.len(),
            MissingMode::IndicatorsOnly => self.indicators.len(),
        }
    }

    pub fn transform(&self, outcomes: &Outcomes) -> Result<Design> {
        if outcomes.k() != self.k {
            return Err(Error::Shape { expected: self.k, actual: outcomes.k() });
        }
        let n = outcomes.n();
        let mut columns = Vec::with_capacity(self.width());
        if self.mode == MissingMode::ImputeWithIndicators {
            for j in 0..self.k {
                columns.push((0..n).map(|i| outcomes.get(i, j).unwrap_or(self.means[j])).collect());
            }
        }
        for &j in &self.indicators {
            columns.push((0..n).map(|i| f64::from(u8::from(outcomes.is_missing(i, j)))).collect());
        }
        Ok(Design::from_columns(n, columns))
    }
}
