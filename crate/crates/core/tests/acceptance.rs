//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.
//!
//! Set `PREDTEST_ACCEPTANCE=1,3` to run a subset.

mod common;

use std::time::Instant;

use common::{rng, set_partitions};
use nalgebra::{DMatrix, DVector};
use predtest::baselines::{multiple_comparison, sur_wald_test, Correction};
use predtest::interpretation::{cell_criterion, implied_ate, optimal_level_set_cells, support_variance};
use predtest::simulation::{
    gen_mean_shift, gen_move_stretch, run_replications, MeanShiftConfig, MoveStretchConfig, PowerTest, TestSeries,
};
use predtest::stats::ks_uniform;
use predtest::{Algorithm, ForestParams, Outcomes, Sample};
use rand::Rng;
use rand_distr::StandardNormal;

const ALPHA: f64 = 0.05;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

/// Least squares plus a forest of 100 trees with `mtry = 1` and minimum leaf
/// size 10. Replaces the per-fit tuned forest to keep the Monte Carlo
/// criteria within a single-core budget.
fn ensemble() -> Algorithm {
    Algorithm::Ensemble {
        members: vec![Algorithm::Ols, Algorithm::Forest(ForestParams { n_trees: 100, ..ForestParams::fixed(1, 10) })],
        outer_folds: 5,
    }
}

fn move_stretch(n: usize, m: f64, s: f64) -> impl Fn(u64) -> predtest::Result<Sample> + Sync + Send {
    move |seed| gen_move_stretch(&MoveStretchConfig::new(n, m, s, seed))
}

fn series(
    generate: impl Fn(u64) -> predtest::Result<Sample> + Sync + Send,
    replications: usize,
    tests: &[PowerTest],
    seed: u64,
) -> Vec<TestSeries> {
    let out = run_replications(generate, replications, tests, ALPHA, seed, 1).expect("replications run");
    for s in &out {
        assert_eq!(s.failures, 0, "{} had failed replications", s.test);
    }
    out
}

fn rate(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v <= ALPHA).count() as f64 / p.len() as f64
}

/// Hold-out OLS test under the null: 5000 draws, B = 199.
fn exact_size() -> Vec<Check> {
    let test = PowerTest::Holdout { algorithm: Algorithm::Ols, train_fraction: 0.5, b: 199 };
    let s = series(move_stretch(100, 0.0, 0.0), 5000, &[test], 101);
    let f = s[0].rejection_rate;
    let ks = ks_uniform(&s[0].p_values);
    vec![
        check("1a exact size: H-test OLS null rejection rate in [4.2%, 5.8%]", (0.042..=0.058).contains(&f), pct(f)),
        check("1b exact size: KS distance of p-values to uniform < 0.025", ks < 0.025, format!("{ks:.4}")),
    ]
}

/// Null cell (0, 0): Wald and CV ensemble (B = 19), R = 2000; the first 439
/// draws form the R = 439 run under the replication seed protocol.
fn null_cells() -> Vec<Check> {
    let tests = [PowerTest::Wald, PowerTest::Cv { algorithm: ensemble(), k: 5, b: 19 }];
    let s = series(move_stretch(100, 0.0, 0.0), 2000, &tests, 202);
    let (w439, e439) = (rate(&s[0].p_values[..439]), rate(&s[1].p_values[..439]));
    let (w, e) = (s[0].rejection_rate, s[1].rejection_rate);
    vec![
        check("2a null cell R=439: Wald 4.3% +- 2.7 pp", within(w439, 0.043, 0.027), pct(w439)),
        check("2b null cell R=439: CV ensemble 3.6% +- 2.7 pp", within(e439, 0.036, 0.027), pct(e439)),
        check("2c null cell R=2000: Wald in [3.5%, 6.5%]", (0.035..=0.065).contains(&w), pct(w)),
        check("2d null cell R=2000: CV ensemble in [3.5%, 6.5%]", (0.035..=0.065).contains(&e), pct(e)),
    ]
}

fn grid_cell(m: f64, s: f64, replications: usize, seed: u64) -> (f64, f64) {
    let tests = [PowerTest::Wald, PowerTest::Cv { algorithm: ensemble(), k: 5, b: 99 }];
    let out = series(move_stretch(100, m, s), replications, &tests, seed);
    (out[0].rejection_rate, out[1].rejection_rate)
}

/// Stretch cell (m = 0, s = 0.5), reduced grid B = 99, R = 200.
fn stretch_cell() -> Vec<Check> {
    let (w, e) = grid_cell(0.0, 0.5, 200, 303);
    vec![
        check("3a stretch cell (B=99, R=200): CV ensemble power 42.4% +- 8 pp", within(e, 0.424, 0.08), pct(e)),
        check("3b stretch cell (B=99, R=200): Wald 5.5% +- 8 pp", within(w, 0.055, 0.08), pct(w)),
        check("3c stretch cell: prediction power > Wald power", e > w, format!("{} vs {}", pct(e), pct(w))),
    ]
}

/// Move cell (m = 0.5, s = 0), B = 99, R = 439.
fn move_cell() -> Vec<Check> {
    let (w, e) = grid_cell(0.5, 0.0, 439, 404);
    vec![
        check("4a move cell (B=99, R=439): Wald 90.0% +- 5 pp", within(w, 0.90, 0.05), pct(w)),
        check("4b move cell (B=99, R=439): CV ensemble 79.3% +- 6 pp", within(e, 0.793, 0.06), pct(e)),
        check("4c move cell: Wald >= prediction", w >= e, format!("{} vs {}", pct(w), pct(e))),
    ]
}

/// Leave-one-out OLS permutation test against the SUR Wald test under local
/// mean shifts `τ₁ / √n` with `τ₁ = (4, 0)` and correlation 0.5.
fn linear_equivalence() -> Vec<Check> {
    let gap = |n: usize, seed: u64| {
        let generate = move |s| {
            gen_mean_shift(&MeanShiftConfig {
                n,
                tau: vec![4.0, 0.0],
                sigma: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
                intercept: Vec::new(),
                local: true,
                p_treat: 0.5,
                seed: s,
            })
        };
        let tests = [PowerTest::Wald, PowerTest::Cv { algorithm: Algorithm::Ols, k: n, b: 999 }];
        let out = series(generate, 1000, &tests, seed);
        (out[0].rejection_rate, out[1].rejection_rate)
    };
    let (w200, l200) = gap(200, 505);
    let (w2000, l2000) = gap(2000, 506);
    let (g200, g2000) = ((l200 - w200).abs(), (l2000 - w2000).abs());
    let detail = format!(
        "n=200: LOO {} Wald {} gap {:.1} pp; n=2000: LOO {} Wald {} gap {:.1} pp",
        pct(l200),
        pct(w200),
        100.0 * g200,
        pct(l2000),
        pct(w2000),
        100.0 * g2000
    );
    vec![
        check("5a linear equivalence: gap shrinks from n=200 to n=2000", g2000 < g200, detail.clone()),
        check("5b linear equivalence: gap < 3 pp at n=2000", g2000 < 0.03, detail),
    ]
}

/// CV forest (50 trees, `mtry = 1`, leaf size 10, B = 19) on the stretch
/// design as n grows, R = 300.
fn consistency() -> Vec<Check> {
    let forest = Algorithm::Forest(ForestParams { n_trees: 50, ..ForestParams::fixed(1, 10) });
    let test = [PowerTest::Cv { algorithm: forest, k: 5, b: 19 }];
    let power: Vec<f64> = [100, 400, 1000]
        .iter()
        .map(|&n| series(move_stretch(n, 0.0, 0.5), 300, &test, 606)[0].rejection_rate)
        .collect();
    let detail = format!("n=100: {}, n=400: {}, n=1000: {}", pct(power[0]), pct(power[1]), pct(power[2]));
    vec![
        check(
            "6a consistency: power increases over n = 100, 400, 1000",
            power[0] < power[1] && power[1] < power[2],
            detail.clone(),
        ),
        check("6b consistency: power > 90% at n = 1000", power[2] > 0.9, detail),
    ]
}

/// Implied effects from the true propensity `1 / (1 + exp(−(0.5 y₁ − 0.125)))`
/// of the mean-shift design `τ = (0.5, 0)`, `Σ = I`, `p = 0.5`.
fn implied_effect_oracle() -> Vec<Check> {
    let errors = |n: usize| -> Vec<f64> {
        (0..20)
            .map(|r| {
                let s = gen_mean_shift(&MeanShiftConfig {
                    n,
                    tau: vec![0.5, 0.0],
                    sigma: Vec::new(),
                    intercept: Vec::new(),
                    local: false,
                    p_treat: 0.5,
                    seed: 700 + r,
                })
                .unwrap();
                let oracle: Vec<f64> =
                    (0..n).map(|i| 1.0 / (1.0 + (-(0.5 * s.outcomes().raw(i, 0) - 0.125)).exp())).collect();
                let e = implied_ate(&oracle, s.outcomes()).unwrap();
                (e.tau_hat[0] - 0.5).abs().max(e.tau_hat[1].abs())
            })
            .collect()
    };
    let small = errors(10_000);
    let large = errors(40_000);
    let worst = small.iter().copied().fold(0.0, f64::max);
    let (ms, ml) = (small.iter().sum::<f64>() / 20.0, large.iter().sum::<f64>() / 20.0);
    vec![
        check(
            "7a implied effect: max-norm error < 0.05 at n = 10^4 (20 draws)",
            worst < 0.05,
            format!("worst {worst:.4}"),
        ),
        check(
            "7b implied effect: mean error decreases from n = 10^4 to 4*10^4",
            ml < ms,
            format!("{ms:.4} -> {ml:.4}"),
        ),
    ]
}

/// Level-set optimality against enumeration, and reverse ranking of the
/// variance criterion and regression loss.
fn partition_oracles() -> Vec<Check> {
    let mut r = rng(808);
    let mut mismatches = 0;
    for _ in 0..100 {
        let m = r.random_range(2..=8);
        let cells = r.random_range(2..=m.min(5));
        let p_y: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        let mass: Vec<f64> = (0..m).map(|_| 0.05 + r.random::<f64>()).collect();
        let best =
            set_partitions(m, cells).iter().map(|c| support_variance(&p_y, &mass, c)).fold(f64::NEG_INFINITY, f64::max);
        let (_, value) = optimal_level_set_cells(&p_y, &mass, cells).unwrap();
        if (value - best).abs() > 1e-12 * (1.0 + best) {
            mismatches += 1;
        }
    }

    let (mut violations, mut pairs) = (0usize, 0usize);
    for _ in 0..100 {
        let n = r.random_range(20..200);
        let mut t: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.4)).collect();
        t[0] = 0;
        t[1] = 1;
        let crit: Vec<_> = (0..20)
            .map(|_| {
                let l = r.random_range(1..8);
                let cells: Vec<usize> = (0..n).map(|_| r.random_range(0..l)).collect();
                cell_criterion(&cells, &t).unwrap()
            })
            .collect();
        for a in &crit {
            for b in &crit {
                if a.variance - b.variance > 1e-12 {
                    pairs += 1;
                    if a.regression_loss >= b.regression_loss {
                        violations += 1;
                    }
                }
            }
        }
    }
    vec![
        check(
            "8a level sets attain the enumerated optimum (100 instances)",
            mismatches == 0,
            format!("{mismatches} mismatches"),
        ),
        check(
            "8b variance and regression-loss rankings are reversed",
            violations == 0,
            format!("{violations} violations in {pairs} ordered pairs"),
        ),
    ]
}

/// Draws at (m = 0.2, s = 0.5, n = 100): CV ensemble (B = 99) against Wald.
fn illustrative_draws() -> Vec<Check> {
    let tests = [PowerTest::Wald, PowerTest::Cv { algorithm: ensemble(), k: 5, b: 99 }];
    let out = series(move_stretch(100, 0.2, 0.5), 200, &tests, 909);
    let (w, e) = (&out[0].p_values, &out[1].p_values);
    let either: Vec<usize> = (0..w.len()).filter(|&i| w[i] <= ALPHA || e[i] <= ALPHA).collect();
    let smaller = either.iter().filter(|&&i| e[i] < w[i]).count();
    let share = smaller as f64 / either.len().max(1) as f64;
    vec![check(
        "9 illustrative draws: CV ensemble p < Wald p in >= 70% of draws where either rejects",
        share >= 0.7,
        format!("{smaller} of {} ({})", either.len(), pct(share)),
    )]
}

fn wald_oracle(s: &Sample) -> f64 {
    let (n, k) = (s.n(), s.k());
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { f64::from(s.treatment()[i]) });
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let y = DMatrix::from_fn(n, k, |i, j| s.outcomes().raw(i, j));
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let v = resid.transpose() * &resid / (n - 2) as f64 * xtx_inv[(1, 1)];
    let tau = DVector::from_fn(k, |j, _| beta[(1, j)]);
    (tau.transpose() * v.try_inverse().unwrap() * &tau)[(0, 0)]
}

/// Correction closed forms and the Wald statistic against normal equations.
fn baseline_identities() -> Vec<Check> {
    let p = [0.01, 0.04, 0.03, 0.2, 0.5];
    let mut worst: f64 = 0.0;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());
    let b = multiple_comparison(&p, Correction::Bonferroni, 0.05).unwrap();
    track(b.threshold, 0.01);
    b.adjusted.iter().zip(&p).for_each(|(a, &q)| track(*a, (5.0 * q).min(1.0)));
    let s = multiple_comparison(&p, Correction::Sidak, 0.05).unwrap();
    track(s.threshold, 1.0 - 0.95f64.powf(0.2));
    s.adjusted.iter().zip(&p).for_each(|(a, &q)| track(*a, 1.0 - (1.0 - q).powi(5)));
    let h = multiple_comparison(&p, Correction::Holm, 0.05).unwrap();
    h.adjusted.iter().zip([0.05, 0.12, 0.12, 0.4, 0.5]).for_each(|(a, e)| track(*a, e));
    track(h.threshold, 0.01);

    let mut r = rng(1010);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(12..80);
        let k = r.random_range(1..5);
        let mut t: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.5)).collect();
        t[0] = 0;
        t[1] = 1;
        let rows: Vec<Vec<f64>> = t
            .iter()
            .map(|&ti| {
                let c: f64 = r.sample(StandardNormal);
                (0..k).map(|j| 0.6 * c + r.sample::<f64, _>(StandardNormal) + 0.2 * j as f64 * f64::from(ti)).collect()
            })
            .collect();
        let sample = Sample::new(Outcomes::from_rows(&rows).unwrap(), t).unwrap();
        let oracle = wald_oracle(&sample);
        let w = sur_wald_test(&sample).unwrap().statistic;
        worst_rel = worst_rel.max((w - oracle).abs() / oracle.abs().max(1e-300));
    }
    vec![
        check("10a corrections match closed forms to 1e-12", worst <= 1e-12, format!("max error {worst:.2e}")),
        check(
            "10b Wald statistic matches normal equations to 1e-8",
            worst_rel <= 1e-8,
            format!("max rel error {worst_rel:.2e}"),
        ),
    ]
}

fn main() {
    let criteria: [(u32, fn() -> Vec<Check>); 10] = [
        (1, exact_size),
        (2, null_cells),
        (3, stretch_cell),
        (4, move_cell),
        (5, linear_equivalence),
        (6, consistency),
        (7, implied_effect_oracle),
        (8, partition_oracles),
        (9, illustrative_draws),
        (10, baseline_identities),
    ];
    let only: Option<Vec<u32>> =
        std::env::var("PREDTEST_ACCEPTANCE").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let checks = run();
        let secs = start.elapsed().as_secs_f64();
        for c in checks {
            failed += usize::from(!c.pass);
            println!("[{}] {} :: {} ({secs:.0}s)", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if failed > 0 {
        println!("{failed} acceptance checks failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
