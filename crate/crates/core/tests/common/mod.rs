#![allow(dead_code)]

use predtest::{Outcomes, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` rows of `k` standard normal outcomes with alternating treatment,
/// shifted by `shift` in the first outcome for treated rows.
pub fn gaussian_sample(n: usize, k: usize, shift: f64, seed: u64) -> Sample {
    let mut r = rng(seed);
    let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = t
        .iter()
        .map(|&ti| {
            (0..k)
                .map(|j| {
                    let e: f64 = r.sample(StandardNormal);
                    if j == 0 {
                        e + shift * f64::from(ti)
                    } else {
                        e
                    }
                })
                .collect()
        })
        .collect();
    Sample::new(Outcomes::from_rows(&rows).unwrap(), t).unwrap()
}

/// Treated rows have first outcome >= 0.5, control rows <= -0.5.
pub fn separable_sample(n: usize, seed: u64) -> Sample {
    let mut r = rng(seed);
    let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let rows: Vec<Vec<f64>> = t
        .iter()
        .map(|&ti| {
            let a = 0.5 + r.random::<f64>();
            let b: f64 = r.sample(StandardNormal);
            vec![if ti == 1 { a } else { -a }, b]
        })
        .collect();
    Sample::new(Outcomes::from_rows(&rows).unwrap(), t).unwrap()
}

pub fn assert_close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b} (tol {tol})");
}

/// Every assignment of `m` items to at most `max_cells` unlabeled cells, as
/// restricted growth strings.
pub fn set_partitions(m: usize, max_cells: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, m: usize, max_cells: usize, used: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for c in 0..(used + 1).min(max_cells) {
            prefix.push(c);
            extend(prefix, m, max_cells, used.max(c + 1), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), m, max_cells, 0, &mut out);
    out
}
