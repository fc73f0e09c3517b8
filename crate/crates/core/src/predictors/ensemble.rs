//! Convex combination weights for ensembles.

/// Mean squared error of `Σ_j w_j preds[j]` against `t`.
pub fn criterion(preds: &[Vec<f64>], w: &[f64], t: &[f64]) -> f64 {
    let n = t.len();
    (0..n)
        .map(|i| {
            let f: f64 = preds.iter().zip(w).map(|(p, wj)| wj * p[i]).sum();
            (f - t[i]).powi(2)
        })
        .sum::<f64>()
        / n as f64
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let candidate = (cum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Weight on the first of two members, searched over {0, 0.01, ..., 1}.
/// Values within 1e-12 of the best are tied and resolved toward 0.5.
fn two_member(preds: &[Vec<f64>], t: &[f64]) -> Vec<f64> {
    let scores: Vec<(f64, f64)> = (0..=100)
        .map(|s| {
            let w = f64::from(s) / 100.0;
            (w, criterion(preds, &[w, 1.0 - w], t))
        })
        .collect();
    let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let w = scores
        .iter()
        .filter(|s| s.1 <= min + 1e-12)
        .min_by(|a, b| (a.0 - 0.5).abs().total_cmp(&(b.0 - 0.5).abs()).then(a.0.total_cmp(&b.0)))
        .map_or(0.5, |s| s.0);
    vec![w, 1.0 - w]
}

/// Projected gradient descent from the uniform weights, then compared with
/// every vertex so the result is never worse than the best single member.
fn many_members(preds: &[Vec<f64>], t: &[f64]) -> Vec<f64> {
    let m = preds.len();
    let n = t.len() as f64;
    let frob: f64 = preds.iter().flat_map(|p| p.iter()).map(|x| x * x).sum();
    let lipschitz = 2.0 * frob / n;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let mut w = vec![1.0 / m as f64; m];
    for _ in 0..1000 {
        let resid: Vec<f64> =
            (0..t.len()).map(|i| preds.iter().zip(&w).map(|(p, wj)| wj * p[i]).sum::<f64>() - t[i]).collect();
        let grad: Vec<f64> =
            preds.iter().map(|p| 2.0 * p.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n).collect();
        let next = project_simplex(&w.iter().zip(&grad).map(|(a, g)| a - step * g).collect::<Vec<_>>());
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        w = next;
        if change <= 1e-10 {
            break;
        }
    }
    let mut best = criterion(preds, &w, t);
    for j in 0..m {
        let mut vertex = vec![0.0; m];
        vertex[j] = 1.0;
        let c = criterion(preds, &vertex, t);
        if c < best {
            best = c;
            w = vertex;
        }
    }
    w
}

/// Simplex weights minimizing [`criterion`]. A single member gets weight 1.
pub fn optimal_weights(preds: &[Vec<f64>], t: &[f64]) -> Vec<f64> {
    match preds.len() {
        0 => Vec::new(),
        1 => vec![1.0],
        2 => two_member(preds, t),
        _ => many_members(preds, t),
    }
}
