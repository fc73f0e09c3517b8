//! CSV ingestion and export.
//!
//! A header row is required. Empty fields are missing values. Numbers use a
//! decimal point and no thousands separators.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Outcomes, Sample};
use crate::error::{Error, Result};

/// Column roles for [`load_sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub treatment: String,
    #[serde(default)]
    pub cluster: Option<String>,
    #[serde(default)]
    pub stratum: Option<String>,
    /// Outcome columns in the order to use. `None` takes every column not
    /// assigned another role, in file order.
    #[serde(default)]
    pub outcomes: Option<Vec<String>>,
}

impl Schema {
    pub fn new(treatment: impl Into<String>) -> Self {
        Self { treatment: treatment.into(), cluster: None, stratum: None, outcomes: None }
    }
}

fn find(header: &HashMap<&str, usize>, name: &str) -> Result<usize> {
    header.get(name).copied().ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
}

/// Read a sample from a CSV file.
///
/// Rows with an empty treatment cell are dropped. Other empty cells in
/// outcome columns become missing values.
pub fn load_sample(path: impl AsRef<Path>, schema: &Schema) -> Result<Sample> {
    let file = std::fs::File::open(path.as_ref())?;
    read_sample(file, schema)
}

pub(crate) fn read_sample<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header_record = rdr.headers()?.clone();
    let header: HashMap<&str, usize> = header_record.iter().enumerate().map(|(i, h)| (h, i)).collect();
    if header.len() != header_record.len() {
        return Err(Error::Schema("duplicate column names in header".into()));
    }
    let t_col = find(&header, &schema.treatment)?;
    let c_col = schema.cluster.as_deref().map(|c| find(&header, c)).transpose()?;
    let s_col = schema.stratum.as_deref().map(|s| find(&header, s)).transpose()?;
    let y_cols: Vec<usize> = match &schema.outcomes {
        Some(names) => names.iter().map(|n| find(&header, n)).collect::<Result<_>>()?,
        None => (0..header_record.len()).filter(|&i| i != t_col && Some(i) != c_col && Some(i) != s_col).collect(),
    };
    if y_cols.is_empty() {
        return Err(Error::Schema("no outcome columns".into()));
    }
    if y_cols.contains(&t_col) {
        return Err(Error::Schema("treatment column cannot also be an outcome".into()));
    }
    let names: Vec<String> = y_cols.iter().map(|&i| header_record[i].to_string()).collect();

    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut treatment = Vec::new();
    let mut clusters = Vec::new();
    let mut strata = Vec::new();
    let mut cluster_codes: HashMap<String, usize> = HashMap::new();
    let mut stratum_codes: HashMap<String, usize> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header_record.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header_record.len(), record.len()),
            });
        }
        let t_raw = &record[t_col];
        if t_raw.is_empty() {
            continue;
        }
        let t = match t_raw.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => {
                return Err(Error::Schema(format!(
                    "treatment column `{}` has non-binary value `{t_raw}` at line {line}",
                    schema.treatment
                )))
            }
        };
        treatment.push(t);
        for &j in &y_cols {
            let cell = &record[j];
            if cell.is_empty() {
                values.push(0.0);
                missing.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{}`: `{cell}` is not a number", &header_record[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column `{}`: non-finite value", &header_record[j]),
                    });
                }
                values.push(v);
                missing.push(false);
            }
        }
        let code = |col: usize, codes: &mut HashMap<String, usize>| -> Result<usize> {
            let raw = &record[col];
            if raw.is_empty() {
                return Err(Error::Schema(format!("empty `{}` label at line {line}", &header_record[col])));
            }
            let next = codes.len();
            Ok(*codes.entry(raw.to_string()).or_insert(next))
        };
        if let Some(c) = c_col {
            clusters.push(code(c, &mut cluster_codes)?);
        }
        if let Some(s) = s_col {
            strata.push(code(s, &mut stratum_codes)?);
        }
    }

    let n = treatment.len();
    let outcomes = Outcomes::with_missing(n, y_cols.len(), values, missing)?;
    let mut sample = Sample::new(outcomes, treatment)?.with_column_names(names)?;
    if c_col.is_some() {
        sample = sample.with_clusters(clusters)?;
    }
    if s_col.is_some() {
        sample = sample.with_strata(strata)?;
    }
    Ok(sample)
}

/// Write a sample as CSV with the treatment column first. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_sample(path: impl AsRef<Path>, sample: &Sample, treatment_name: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec![treatment_name.to_string()];
    if sample.clusters().is_some() {
        header.push("cluster".into());
    }
    if sample.strata().is_some() {
        header.push("stratum".into());
    }
    header.extend(sample.column_names().iter().cloned());
    wtr.write_record(&header)?;
    let y = sample.outcomes();
    for i in 0..sample.n() {
        let mut row = vec![sample.treatment()[i].to_string()];
        if let Some(c) = sample.clusters() {
            row.push(c[i].to_string());
        }
        if let Some(s) = sample.strata() {
            row.push(s[i].to_string());
        }
        row.extend((0..sample.k()).map(|j| y.get(i, j).map_or_else(String::new, |v| format!("{v:?}"))));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
