//! The three subcommands and their output files.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use predtest::baselines::{multiple_comparison, sur_wald_test, t_test_per_outcome, Correction};
use predtest::data::split_holdout_rows;
use predtest::interpretation::{
    honest_level_set_estimates, honest_partition_estimates, implied_ate, index_summary, level_set_partition,
    level_set_partition_for, tree_partition, ImpliedEffect, IndexSummary, Partition, PartitionEstimate, SizeRule,
};
use predtest::rng::{self, tag};
use predtest::simulation::{ecdf_csv, pvalue_ecdf, run_power_study, PowerStudyConfig, PowerTable};
use predtest::{load_sample, run_cv_test, run_holdout_test, CvOptions, HoldoutOptions, Sample, TestResult};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Contents of `result.json`: the resolved configuration, the test result
/// and optional baseline tests.
#[derive(Debug, Serialize, Deserialize)]
struct TestReport {
    config: RunConfig,
    #[serde(flatten)]
    result: TestResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baselines: Option<Value>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", dir.join(name).display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string())).map(|s| s + "\n")
}

fn prepare_out(config: &RunConfig) -> Result<&Path, CliError> {
    let dir = config.out_dir()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("`out`: cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Checks that every column named in the configuration is in the CSV header,
/// then loads the sample.
fn load(config: &RunConfig) -> Result<Sample, CliError> {
    let path = config.input()?;
    let schema = config.schema()?;
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open input {}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header of {}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let named = [
        ("treatment", Some(&schema.treatment)),
        ("cluster", schema.cluster.as_ref()),
        ("stratum", schema.stratum.as_ref()),
    ];
    for (field, column) in named {
        if let Some(column) = column {
            if !header.contains(column) {
                return Err(CliError::Config(format!("`{field}`: column `{column}` not found in {}", path.display())));
            }
        }
    }
    for column in schema.outcomes.iter().flatten() {
        if !header.contains(column) {
            return Err(CliError::Config(format!("`outcomes`: column `{column}` not found in {}", path.display())));
        }
    }
    Ok(load_sample(path, &schema)?)
}

fn baselines(sample: &Sample, alpha: f64) -> Value {
    let wald = match sur_wald_test(sample) {
        Ok(w) => serde_json::to_value(w).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let mut out = json!({ "wald": wald });
    match t_test_per_outcome(sample) {
        Ok(tests) => {
            let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
            out["t_tests"] = serde_json::to_value(&tests).unwrap_or(Value::Null);
            for (name, method) in
                [("bonferroni", Correction::Bonferroni), ("holm", Correction::Holm), ("sidak", Correction::Sidak)]
            {
                out[name] = match multiple_comparison(&p, method, alpha) {
                    Ok(c) => serde_json::to_value(c).unwrap_or(Value::Null),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
        }
        Err(e) => out["t_tests"] = json!({ "error": e.to_string() }),
    }
    out
}

pub fn test(config: RunConfig) -> Result<(), CliError> {
    let config = config.resolved();
    let seed = config.seed()?;
    let alpha = config.alpha()?;
    let algorithm = config.algorithm()?;
    let loss = config.loss()?;
    let is_cv = config.is_cv()?;
    let workers = config.workers.unwrap_or(1);
    let b = config.b.unwrap_or(199);
    let sample = load(&config)?;
    let dir = prepare_out(&config)?;

    let result = if is_cv {
        let options = CvOptions { k: config.k.unwrap_or(5), b, loss, seed, workers, ..CvOptions::default() };
        run_cv_test(&sample, &algorithm, &options)?
    } else {
        let options = HoldoutOptions { train_fraction: config.train_fraction.unwrap_or(0.5), b, loss, seed, workers };
        run_holdout_test(&sample, &algorithm, &options)?
    };
    let baselines = config.baselines.unwrap_or(true).then(|| baselines(&sample, alpha));

    let mut summary = String::new();
    let design = if is_cv { format!("CV, K = {}", result.k_or_m) } else { format!("H, m = {}", result.k_or_m) };
    let trivial = {
        let p = sample.n_treated() as f64 / sample.n() as f64;
        p * (1.0 - p)
    };
    let _ = writeln!(summary, "prediction test of any treatment effect");
    let _ = writeln!(summary, "input:      {}", config.input()?.display());
    let _ = writeln!(summary, "n = {}, k = {}, treated = {}", sample.n(), sample.k(), sample.n_treated());
    let _ = writeln!(summary, "design:     {design}");
    let _ = writeln!(summary, "algorithm:  {}", result.algorithm);
    let _ = writeln!(summary, "loss:       {:?}", result.loss_kind);
    let _ = writeln!(summary, "L_hat:      {:.6} (constant benchmark {:.6})", result.observed_loss, trivial);
    let _ = writeln!(summary, "B:          {}", result.b);
    let _ =
        writeln!(summary, "p-value:    {:.4} ({} at alpha = {alpha})", result.p_value, decision(result.rejects(alpha)));
    let _ = writeln!(summary, "seed:       {seed}");
    if let Some(base) = &baselines {
        let _ = writeln!(summary, "\nbaselines");
        if let Some(p) = base["wald"]["p_value"].as_f64() {
            let _ = writeln!(summary, "SUR Wald:   p = {p:.4}");
        }
        for name in ["bonferroni", "holm", "sidak"] {
            if let Some(adjusted) = base[name]["adjusted"].as_array() {
                let p = adjusted.iter().filter_map(Value::as_f64).fold(1.0f64, f64::min);
                let _ = writeln!(summary, "{:<11} min adjusted p = {p:.4}", format!("{name}:"));
            }
        }
    }
    for note in &result.notes {
        let _ = writeln!(summary, "note: {note}");
    }

    let dir = dir.to_path_buf();
    let report = TestReport { config, result, baselines };
    write(&dir, "result.json", &to_json(&report)?)?;
    write(&dir, "summary.txt", &summary)
}

fn decision(reject: bool) -> &'static str {
    if reject {
        "reject"
    } else {
        "do not reject"
    }
}

pub fn simulate(config: RunConfig) -> Result<(), CliError> {
    let config = config.resolved();
    let replications = config.replications.unwrap_or(0);
    if replications == 0 {
        return Err(CliError::Config("`replications` must be positive".into()));
    }
    let study = PowerStudyConfig {
        grid: config.grid()?,
        n: config.n.unwrap_or(100),
        replications,
        tests: config.power_tests()?,
        alpha: config.alpha()?,
        seed: config.seed()?,
        p_treat: config.p_treat.unwrap_or(0.5),
        workers: config.workers.unwrap_or(1),
    };
    let dir = prepare_out(&config)?;
    let table = run_power_study(&study)?;
    let run_line = format!("# run: {}\n", serde_json::to_string(&config).map_err(|e| CliError::Data(e.to_string()))?);

    write(dir, "power.csv", &(run_line.clone() + &table.to_csv()?))?;
    write(dir, "power.json", &to_json(&json!({ "run": config, "table": table }))?)?;
    write(dir, "ecdf.csv", &(run_line.clone() + &ecdf_csv(&pvalue_ecdf(&table))))?;
    write(dir, "summary.txt", &(run_line + &power_summary(&table)))
}

fn power_summary(table: &PowerTable) -> String {
    let mut out = String::new();
    let tests: Vec<String> =
        table.cells.first().map(|c| c.series.iter().map(|s| s.test.clone()).collect()).unwrap_or_default();
    let _ = writeln!(
        out,
        "rejection rates (%) at alpha = {}, n = {}, R = {}",
        table.config.alpha, table.config.n, table.config.replications
    );
    let _ = write!(out, "{:>5} {:>5}", "m", "s");
    for t in &tests {
        let _ = write!(out, "  {t:>12}");
    }
    out.push('\n');
    for cell in &table.cells {
        let _ = write!(out, "{:>5} {:>5}", cell.m, cell.s);
        for s in &cell.series {
            let _ = write!(out, "  {:>12.1}", 100.0 * s.rejection_rate);
        }
        out.push('\n');
    }
    out
}

/// Predictions, partition and estimation rows for one interpretation.
struct Interpretation {
    source: String,
    implied: Result<ImpliedEffect, String>,
    index: Result<IndexSummary, String>,
    partition: Partition,
    estimates: PartitionEstimate,
}

fn summarize(predictions: &[f64], sample: &Sample) -> (Result<ImpliedEffect, String>, Result<IndexSummary, String>) {
    (
        implied_ate(predictions, sample.outcomes()).map_err(|e| e.to_string()),
        index_summary(predictions, sample.treatment()).map_err(|e| e.to_string()),
    )
}

fn read_report(dir: &Path) -> Result<TestReport, CliError> {
    let path = dir.join("result.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("no prior test run at {}: {e}; pass --refit to refit", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn interpret(overrides: RunConfig) -> Result<(), CliError> {
    let refit = overrides.refit.unwrap_or(false);
    let report = match (&overrides.from, refit) {
        (Some(dir), false) => Some(read_report(dir)?),
        (None, false) => {
            return Err(CliError::Data("no prior test artifacts: pass --from DIR or --refit".into()));
        }
        (_, true) => None,
    };
    let config = match &report {
        Some(r) => r.config.clone().merged(overrides),
        None => overrides,
    }
    .resolved();
    let seed = config.seed()?;
    let cells = config.cells.unwrap_or(4);
    let use_tree = match config.partition.as_deref().unwrap_or("level_set") {
        "level_set" => false,
        "tree" => true,
        other => return Err(CliError::Config(format!("`partition`: expected level_set or tree, got `{other}`"))),
    };
    let sample = load(&config)?;
    let dir = prepare_out(&config)?;

    let found = match report {
        Some(report) => from_result(&report.result, &sample, cells, use_tree, seed)?,
        None => refit_split(&config, &sample, cells, use_tree, seed)?,
    };

    let implied = match &found.implied {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e }),
    };
    let index = match &found.index {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e }),
    };
    let doc = json!({
        "config": config,
        "source": found.source,
        "implied_effect": implied,
        "index_summary": index,
        "partition": {
            "kind": found.partition.kind(),
            "cutoffs": found.partition.cutoffs(),
            "cells": found.partition.cell_labels(),
            "predictor": found.partition.predictor_label,
            "warnings": found.partition.warnings,
        },
        "estimates": found.estimates,
    });
    write(dir, "partition.json", &to_json(&doc)?)?;

    let mut text = String::new();
    let _ = writeln!(text, "interpretation ({}), seed {seed}", found.source);
    match &found.implied {
        Ok(v) => {
            let _ = writeln!(text, "implied mean effects:");
            for (name, tau) in sample.column_names().iter().zip(&v.tau_hat) {
                let _ = writeln!(text, "  {name:<12} {tau:>10.4}");
            }
        }
        Err(e) => {
            let _ = writeln!(text, "implied mean effects unavailable: {e}");
        }
    }
    if let Ok(ix) = &found.index {
        let _ = writeln!(
            text,
            "prediction index: mean difference {:.4}, standardized {:.4}",
            ix.mean_diff, ix.standardized_diff
        );
    }
    let _ = writeln!(text, "\n{} partition, honest estimates", found.partition.kind());
    text.push_str(&found.estimates.to_table());
    write(dir, "summary.txt", &text)
}

/// Interpretation of a stored test result. A hold-out result reuses its
/// fitted predictor: cutoffs from the training rows, estimates on the
/// hold-out rows. A cross-validation result splits its out-of-fold
/// predictions in two: cutoffs from one half, estimates on the other.
fn from_result(
    result: &TestResult,
    sample: &Sample,
    cells: usize,
    use_tree: bool,
    seed: u64,
) -> Result<Interpretation, CliError> {
    if result.n != sample.n() || result.prediction_rows.iter().any(|&i| i >= sample.n()) {
        return Err(CliError::Data(format!("stored result has n = {}, input has n = {}", result.n, sample.n())));
    }
    let rows = &result.prediction_rows;
    if let (Some(predictor), Some(train)) = (&result.predictor, &result.train_rows) {
        let train_sample = sample.subset(train);
        let holdout = sample.subset(rows);
        let partition = if use_tree {
            tree_partition(&train_sample, cells)?
        } else {
            level_set_partition_for(Arc::new(predictor.clone()), train_sample.outcomes(), cells, &SizeRule::EqualMass)?
        };
        let estimates = honest_partition_estimates(&partition, &holdout)?;
        let (implied, index) = summarize(&result.predictions, &holdout);
        return Ok(Interpretation { source: "hold-out result".into(), implied, index, partition, estimates });
    }

    let ordered = sample.subset(rows);
    let (implied, index) = summarize(&result.predictions, &ordered);
    let split = split_holdout_rows(&ordered, 0.5, rng::derive(seed, tag::SPLIT))?;
    let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| result.predictions[i]).collect() };
    let holdout = ordered.subset(&split.holdout);
    let (partition, estimates) = if use_tree {
        let partition = tree_partition(&ordered.subset(&split.train), cells)?;
        let estimates = honest_partition_estimates(&partition, &holdout)?;
        (partition, estimates)
    } else {
        let partition = level_set_partition(&pick(&split.train), cells, &SizeRule::EqualMass)?;
        let estimates = honest_level_set_estimates(&partition, &pick(&split.holdout), &holdout)?;
        (partition, estimates)
    };
    Ok(Interpretation { source: "cross-validation result".into(), implied, index, partition, estimates })
}

/// Fresh split: fit and partition on the training part, estimate on the rest.
fn refit_split(
    config: &RunConfig,
    sample: &Sample,
    cells: usize,
    use_tree: bool,
    seed: u64,
) -> Result<Interpretation, CliError> {
    let algorithm = config.algorithm()?;
    let fraction = config.train_fraction.unwrap_or(0.5);
    let split = split_holdout_rows(sample, fraction, rng::derive(seed, tag::SPLIT))?;
    let train = sample.subset(&split.train);
    let holdout = sample.subset(&split.holdout);
    let predictor = Arc::new(algorithm.fit_sample(&train, rng::derive(seed, tag::FIT))?);
    let predictions = predictor.predict(holdout.outcomes())?;
    let partition = if use_tree {
        tree_partition(&train, cells)?
    } else {
        level_set_partition_for(predictor, train.outcomes(), cells, &SizeRule::EqualMass)?
    };
    let estimates = honest_partition_estimates(&partition, &holdout)?;
    let (implied, index) = summarize(&predictions, &holdout);
    Ok(Interpretation { source: "refit".into(), implied, index, partition, estimates })
}
