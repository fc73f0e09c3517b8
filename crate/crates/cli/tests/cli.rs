use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use predtest::data::write_sample;
use predtest::simulation::{gen_move_stretch, MoveStretchConfig};
use predtest::{Outcomes, Sample};
use serde_json::Value;

fn predtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predtest")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn move_stretch_file(dir: &Path, m: f64, s: f64, n: usize) -> PathBuf {
    let path = dir.join(format!("data_{m}_{s}_{n}.csv"));
    let sample = gen_move_stretch(&MoveStretchConfig::new(n, m, s, 11)).unwrap();
    write_sample(&path, &sample, "T").unwrap();
    path
}

fn separable_file(dir: &Path) -> PathBuf {
    let path = dir.join("separable.csv");
    let rows: Vec<Vec<f64>> =
        (0..120).map(|i| vec![f64::from(i % 2) * 5.0 + f64::from(i % 7) * 0.1, f64::from(i % 5)]).collect();
    let t: Vec<u8> = (0..120).map(|i| (i % 2) as u8).collect();
    let sample = Sample::new(Outcomes::from_rows(&rows).unwrap(), t).unwrap();
    write_sample(&path, &sample, "T").unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_ENSEMBLE: [&str; 8] = ["--algo", "ensemble", "--trees", "10", "--mtry", "1", "--min-node", "10"];

#[test]
fn cv_ensemble_run_writes_result_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.2, 0.5, 100);
    let out = dir.path().join("run");
    let mut args = vec!["test", "--input", s(&data), "--treatment", "T", "--design", "cv", "--k", "5", "--b", "199"];
    args.extend(SMALL_ENSEMBLE);
    args.extend(["--seed", "7", "--out", s(&out)]);
    let o = predtest(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    let p = r["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    assert_eq!(r["B"], 199);
    assert_eq!(r["design"], "CV");
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(r["config"]["algo"], "ensemble");
    assert!(r["baselines"]["wald"]["p_value"].is_number());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("L_hat") && summary.contains("p-value") && summary.contains("B:"));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.0, 0.5, 80);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["test", "--input", s(&data), "--treatment", "T", "--b", "39", "--seed", "3"];
        args.extend(SMALL_ENSEMBLE);
        args.extend(["--out", s(&out)]);
        assert!(predtest(&args).status.success());
        std::fs::read(out.join("result.json")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    // The output directory is part of the embedded configuration.
    let a = String::from_utf8(a).unwrap().replace(s(&dir.path().join("a")), "OUT");
    let b = String::from_utf8(b).unwrap().replace(s(&dir.path().join("b")), "OUT");
    assert_eq!(a, b);
}

#[test]
fn missing_treatment_column_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.0, 0.0, 40);
    let out = dir.path().join("run");
    let o = predtest(&["test", "--input", s(&data), "--treatment", "assigned", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("assigned"));
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.0, 0.0, 40);
    let o = predtest(&["test", "--input", s(&data), "--treatment", "T", "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn single_arm_data_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one_arm.csv");
    std::fs::write(&path, "Y1,T\n1,1\n2,1\n3,1\n4,1\n5,1\n").unwrap();
    let o =
        predtest(&["test", "--input", s(&path), "--treatment", "T", "--seed", "1", "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn malformed_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "Y1,T\n1,1\n2,0\nabc,1\n4,0\n5,1\n").unwrap();
    let o =
        predtest(&["test", "--input", s(&path), "--treatment", "T", "--seed", "1", "--out", s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.5, 0.0, 60);
    let out = dir.path().join("run");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "input = {:?}\ntreatment = \"T\"\nalgo = \"ols\"\ndesign = \"holdout\"\nb = 19\nseed = 5\nout = {:?}\n",
            s(&data),
            s(&out)
        ),
    )
    .unwrap();
    let o = predtest(&["test", "--config", s(&config), "--b", "29"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    assert_eq!(r["B"], 29);
    assert_eq!(r["design"], "H");
    assert_eq!(r["config"]["b"], 29);

    std::fs::write(&config, "sed = 5\n").unwrap();
    assert_eq!(predtest(&["test", "--config", s(&config)]).status.code(), Some(2));
}

#[test]
fn simulate_rejects_zero_replications() {
    let dir = tempfile::tempdir().unwrap();
    let o = predtest(&["simulate", "--replications", "0", "--seed", "1", "--out", s(&dir.path().join("sim"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_cell_holdout_simulation_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let start = Instant::now();
    let o = predtest(&[
        "simulate",
        "--m",
        "0",
        "--s",
        "0",
        "--replications",
        "100",
        "--design",
        "holdout",
        "--algo",
        "ols",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed().as_secs() < 60);
    let csv = std::fs::read_to_string(out.join("power.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# run: {") && lines[0].contains("\"seed\":4"));
    assert!(lines[1].starts_with("# config: {"));
    assert_eq!(lines[2], "m,s,test,rejection_rate,se,R");
    assert_eq!(lines.len(), 3 + 3);
    assert!(lines[5].starts_with("0,0,holdout_ols,"));
    let ecdf = std::fs::read_to_string(out.join("ecdf.csv")).unwrap();
    assert!(ecdf.lines().nth(1) == Some("cell,test,p,ecdf"));
    let table = json(&out.join("power.json"));
    assert_eq!(table["table"]["cells"][0]["series"][2]["p_values"].as_array().unwrap().len(), 100);
}

#[test]
fn interpret_needs_prior_artifacts_or_refit() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.0, 0.0, 40);
    let out = dir.path().join("i");
    let o = predtest(&["interpret", "--input", s(&data), "--treatment", "T", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let o = predtest(&["interpret", "--from", s(&dir.path().join("nothing")), "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn interpret_null_run_from_prior_test() {
    let dir = tempfile::tempdir().unwrap();
    let data = move_stretch_file(dir.path(), 0.0, 0.0, 400);
    let run = dir.path().join("run");
    let o = predtest(&[
        "test",
        "--input",
        s(&data),
        "--treatment",
        "T",
        "--algo",
        "ols",
        "--b",
        "19",
        "--seed",
        "2",
        "--out",
        s(&run),
    ]);
    assert!(o.status.success());
    let out = dir.path().join("interp");
    let o = predtest(&["interpret", "--from", s(&run), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out.join("partition.json"));
    assert_eq!(doc["config"]["seed"], 2);
    for tau in doc["implied_effect"]["tau_hat"].as_array().unwrap() {
        assert!(tau.as_f64().unwrap().abs() < 0.3, "{tau}");
    }
    assert!(doc["estimates"]["p_value"].as_f64().unwrap() > 0.05);
    assert!(std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("chi-square"));
}

#[test]
fn interpret_separable_data_gives_pure_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = separable_file(dir.path());
    let out = dir.path().join("interp");
    let o = predtest(&[
        "interpret",
        "--input",
        s(&data),
        "--treatment",
        "T",
        "--refit",
        "--algo",
        "tree",
        "--min-node",
        "1",
        "--cells",
        "2",
        "--seed",
        "9",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out.join("partition.json"));
    assert_eq!(doc["source"], "refit");
    for cell in doc["estimates"]["cells"].as_array().unwrap() {
        let n1 = cell["n_treated"].as_u64().unwrap();
        let n0 = cell["n_control"].as_u64().unwrap();
        assert!(n1.min(n0) * 10 <= n1 + n0, "{cell}");
    }
}
