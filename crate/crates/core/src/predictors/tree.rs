//! CART regression trees on squared error.
//!
//! Split search runs over per-feature presorted row orders that are
//! partitioned stably as the tree grows, so no node re-sorts its rows.
//! Bootstrap resamples are handled as integer row weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Design;

/// Minimum loss reduction for a split to count as an improvement, and the
/// margin a later candidate must beat to displace an earlier one.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Weighted squared-error reduction achieved by this split.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Weighted mean target of the training rows reaching this node.
    pub value: f64,
    /// Total training weight (units, counting bootstrap multiplicity).
    pub weight: f64,
    pub split: Option<Split>,
}

/// A fitted binary tree. Node 0 is the root. Rows with
/// `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Per-feature row orders, sorted by value then row index.
#[derive(Debug, Clone)]
pub struct Presorted {
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(design: &Design) -> Self {
        let orders = (0..design.p())
            .map(|j| {
                let col = design.col(j);
                let mut idx: Vec<u32> = (0..design.n() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { orders }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub min_node: usize,
    pub mtry: usize,
}

/// Reusable buffers for growing many trees on the same design.
pub struct TreeWorkspace {
    entries: Vec<Entry>,
    scratch: Vec<Entry>,
    goes_left: Vec<bool>,
    features: Vec<usize>,
    stack: Vec<(usize, usize, usize, f64, f64)>,
}

impl TreeWorkspace {
    pub fn new(n: usize, p: usize) -> Self {
        Self {
            entries: Vec::with_capacity(n * p),
            scratch: Vec::with_capacity(n),
            goes_left: vec![false; n],
            features: (0..p).collect(),
            stack: Vec::new(),
        }
    }
}

/// One in-bag row as seen from one feature's sorted order.
#[derive(Debug, Clone, Copy)]
struct Entry {
    x: f64,
    w: f64,
    wy: f64,
    row: u32,
}

struct Candidate {
    gain: f64,
    feature: usize,
    pos: usize,
    threshold: f64,
    wl: f64,
    sl: f64,
}

/// Grow a tree on `design` with targets `y`.
///
/// `counts` gives the multiplicity of each row (bootstrap); `None` means
/// every row once. Features considered at each node are `mtry` draws without
/// replacement from `rng`; when `mtry >= p` all features are used and `rng`
/// is not touched.
pub fn grow<R: Rng>(
    design: &Design,
    presorted: &Presorted,
    y: &[f64],
    counts: Option<&[u32]>,
    params: TreeParams,
    rng: &mut R,
    ws: &mut TreeWorkspace,
) -> Tree {
    let p = design.p();
    let min_node = params.min_node.max(1) as f64;
    let mtry = params.mtry.clamp(1, p.max(1));

    let (mut total_w, mut total_s) = (0.0, 0.0);
    match counts {
        None => {
            total_w = y.len() as f64;
            total_s = y.iter().sum();
        }
        Some(c) => {
            for (&ci, &yi) in c.iter().zip(y) {
                total_w += f64::from(ci);
                total_s += f64::from(ci) * yi;
            }
        }
    }
    let mut nodes = Vec::with_capacity(16);
    nodes.push(Node { value: if total_w > 0.0 { total_s / total_w } else { 0.0 }, weight: total_w, split: None });
    if p == 0 || total_w == 0.0 {
        return Tree { nodes };
    }

    // In-bag rows, per feature, in sorted order.
    ws.entries.clear();
    for f in 0..p {
        let x = design.col(f);
        let order = &presorted.orders[f];
        match counts {
            None => {
                ws.entries.extend(order.iter().map(|&r| Entry { x: x[r as usize], w: 1.0, wy: y[r as usize], row: r }))
            }
            Some(c) => ws.entries.extend(order.iter().filter(|&&r| c[r as usize] > 0).map(|&r| {
                let w = f64::from(c[r as usize]);
                Entry { x: x[r as usize], w, wy: w * y[r as usize], row: r }
            })),
        }
    }
    let m = ws.entries.len() / p;
    let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);

    ws.stack.clear();
    ws.stack.push((0, 0, m, total_w, total_s));
    while let Some((node, lo, hi, wsum, ssum)) = ws.stack.pop() {
        if wsum < 2.0 * min_node || hi - lo < 2 {
            continue;
        }
        if binary && (ssum == 0.0 || ssum == wsum) {
            continue;
        }
        if mtry < p {
            for i in 0..mtry {
                let j = rng.random_range(i..p);
                ws.features.swap(i, j);
            }
            ws.features[..mtry].sort_unstable();
        } else {
            for (i, f) in ws.features.iter_mut().enumerate() {
                *f = i;
            }
        }
        let parent_score = ssum * ssum / wsum;
        let mut best: Option<Candidate> = None;
        let mut to_beat = GAIN_EPS;
        for fi in 0..mtry {
            let f = ws.features[fi];
            let seg = &ws.entries[f * m + lo..f * m + hi];
            let (mut wl, mut sl) = (0.0, 0.0);
            for pos in 0..seg.len() - 1 {
                let e = seg[pos];
                wl += e.w;
                sl += e.wy;
                if wl < min_node {
                    continue;
                }
                let wr = wsum - wl;
                if wr < min_node {
                    break;
                }
                let xb = seg[pos + 1].x;
                if e.x >= xb {
                    continue;
                }
                let sr = ssum - sl;
                let gain = sl * sl / wl + sr * sr / wr - parent_score;
                if gain > to_beat {
                    let mut threshold = 0.5 * (e.x + xb);
                    if !(e.x < threshold && threshold <= xb) {
                        threshold = xb;
                    }
                    to_beat = gain + GAIN_EPS;
                    best = Some(Candidate { gain, feature: f, pos: lo + pos, threshold, wl, sl });
                }
            }
        }
        let Some(best) = best else { continue };

        let seg_f = best.feature * m;
        for pos in lo..=best.pos {
            ws.goes_left[ws.entries[seg_f + pos].row as usize] = true;
        }
        let n_left = best.pos + 1 - lo;
        for f in 0..p {
            if f == best.feature {
                continue;
            }
            let seg = &mut ws.entries[f * m + lo..f * m + hi];
            ws.scratch.clear();
            let mut write = 0;
            for idx in 0..seg.len() {
                let e = seg[idx];
                if ws.goes_left[e.row as usize] {
                    seg[write] = e;
                    write += 1;
                } else {
                    ws.scratch.push(e);
                }
            }
            seg[write..].copy_from_slice(&ws.scratch);
        }
        for pos in lo..lo + n_left {
            ws.goes_left[ws.entries[seg_f + pos].row as usize] = false;
        }

        let left = nodes.len();
        let right = left + 1;
        let (wr, sr) = (wsum - best.wl, ssum - best.sl);
        nodes.push(Node { value: best.sl / best.wl, weight: best.wl, split: None });
        nodes.push(Node { value: sr / wr, weight: wr, split: None });
        nodes[node].split =
            Some(Split { feature: best.feature, threshold: best.threshold, left, right, gain: best.gain });
        ws.stack.push((right, lo + n_left, hi, wr, sr));
        ws.stack.push((left, lo, lo + n_left, best.wl, best.sl));
    }
    Tree { nodes }
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf reached by row `i` of `design`.
    #[inline]
    pub fn leaf_of(&self, design: &Design, i: usize) -> usize {
        let mut node = 0;
        while let Some(s) = &self.nodes[node].split {
            node = if design.get(i, s.feature) < s.threshold { s.left } else { s.right };
        }
        node
    }

    pub fn predict(&self, design: &Design) -> Vec<f64> {
        (0..design.n()).map(|i| self.nodes[self.leaf_of(design, i)].value).collect()
    }

    pub fn add_predictions(&self, design: &Design, acc: &mut [f64]) {
        for (i, a) in acc.iter_mut().enumerate() {
            *a += self.nodes[self.leaf_of(design, i)].value;
        }
    }

    /// Leaf node indices in depth-first (left before right) order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node].split {
                None => out.push(node),
                Some(s) => {
                    stack.push(s.right);
                    stack.push(s.left);
                }
            }
        }
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// Collapse weakest-link splits until at most `leaves` leaves remain. A
    /// split is collapsible when both children are leaves; the one with the
    /// smallest gain goes first (ties: lowest node index).
    pub fn prune_to(&self, leaves: usize) -> Tree {
        let mut nodes = self.nodes.clone();
        // Unreachable nodes are dropped by the compaction below.
        let mut alive = vec![true; nodes.len()];
        while count_reachable_leaves(&nodes) > leaves.max(1) {
            let weakest = (0..nodes.len())
                .filter(|&i| alive[i])
                .filter_map(|i| nodes[i].split.map(|s| (i, s)))
                .filter(|(_, s)| nodes[s.left].split.is_none() && nodes[s.right].split.is_none())
                .min_by(|a, b| a.1.gain.total_cmp(&b.1.gain).then(a.0.cmp(&b.0)));
            let Some((i, s)) = weakest else { break };
            alive[s.left] = false;
            alive[s.right] = false;
            nodes[i].split = None;
        }
        compact(&nodes)
    }

    /// Axis-aligned bounds `(lower, upper)` per feature for every node:
    /// rows in the node satisfy `lower <= x < upper`.
    pub fn node_bounds(&self, p: usize) -> Vec<Vec<(f64, f64)>> {
        let mut bounds = vec![vec![(f64::NEG_INFINITY, f64::INFINITY); p]; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if let Some(s) = &self.nodes[node].split {
                let mut l = bounds[node].clone();
                let mut r = bounds[node].clone();
                l[s.feature].1 = l[s.feature].1.min(s.threshold);
                r[s.feature].0 = r[s.feature].0.max(s.threshold);
                bounds[s.left] = l;
                bounds[s.right] = r;
                stack.push(s.left);
                stack.push(s.right);
            }
        }
        bounds
    }
}

fn count_reachable_leaves(nodes: &[Node]) -> usize {
    let mut count = 0;
    let mut stack = vec![0usize];
    while let Some(node) = stack.pop() {
        match &nodes[node].split {
            None => count += 1,
            Some(s) => {
                stack.push(s.left);
                stack.push(s.right);
            }
        }
    }
    count
}

/// Renumber reachable nodes in preorder.
fn compact(nodes: &[Node]) -> Tree {
    let mut out: Vec<Node> = Vec::new();
    fn visit(nodes: &[Node], node: usize, out: &mut Vec<Node>) -> usize {
        let idx = out.len();
        out.push(Node { split: None, ..nodes[node].clone() });
        if let Some(s) = nodes[node].split {
            let left = visit(nodes, s.left, out);
            let right = visit(nodes, s.right, out);
            out[idx].split = Some(Split { left, right, ..s });
        }
        idx
    }
    visit(nodes, 0, &mut out);
    Tree { nodes: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn fit(columns: Vec<Vec<f64>>, y: &[f64], min_node: usize) -> (Tree, Design) {
        let n = y.len();
        let d = Design::from_columns(n, columns);
        let pre = Presorted::new(&d);
        let mut ws = TreeWorkspace::new(n, d.p());
        let mtry = d.p();
        let tree = grow(&d, &pre, y, None, TreeParams { min_node, mtry }, &mut rng::stream(0, 0), &mut ws);
        (tree, d)
    }

    #[test]
    fn separable_single_split() {
        let x = vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let (tree, d) = fit(vec![x], &y, 1);
        let root = tree.nodes()[0].split.unwrap();
        assert_eq!(root.threshold, 0.0);
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(tree.predict(&d), y);
    }

    #[test]
    fn constant_features_give_root_only() {
        let y = [0.0, 1.0, 0.0, 1.0];
        let (tree, _) = fit(vec![vec![2.0; 4]], &y, 1);
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.nodes()[0].value, 0.5);
    }

    #[test]
    fn min_node_limits_children() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let (tree, _) = fit(vec![x], &y, 3);
        for node in tree.nodes() {
            assert!(node.weight >= 3.0);
        }
    }

    #[test]
    fn prune_keeps_strongest_split() {
        let x = vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let (tree, _) = fit(vec![x], &y, 1);
        assert!(tree.n_leaves() > 2);
        let pruned = tree.prune_to(2);
        assert_eq!(pruned.n_leaves(), 2);
        assert_eq!(pruned.prune_to(1).n_leaves(), 1);
    }

    #[test]
    fn bootstrap_counts_act_as_weights() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let d = Design::from_columns(4, vec![x]);
        let pre = Presorted::new(&d);
        let mut ws = TreeWorkspace::new(4, 1);
        let counts = [2, 0, 1, 1];
        let t = grow(&d, &pre, &y, Some(&counts), TreeParams { min_node: 1, mtry: 1 }, &mut rng::stream(0, 0), &mut ws);
        assert_eq!(t.nodes()[0].weight, 4.0);
        assert_eq!(t.nodes()[0].value, 0.5);
        // The only in-bag gap separating classes is between 0 and 2.
        assert_eq!(t.nodes()[0].split.unwrap().threshold, 1.0);
    }
}
