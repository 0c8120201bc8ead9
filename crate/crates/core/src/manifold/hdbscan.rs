use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Eom,
    Leaf,
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eom" => Ok(Selection::Eom),
            "leaf" => Ok(Selection::Leaf),
            other => Err(Error::Parameter(format!("unknown cluster selection '{other}'"))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Eom => "eom",
            Selection::Leaf => "leaf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub strengths: Vec<f64>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| (m + 1).max(0) as usize)
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance to the `min_samples`-th nearest point, the point itself counted
/// as the first.
pub fn core_distances(x: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![];
    }
    let k = min_samples.clamp(1, n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| euclid(&x[i], &x[j])).collect();
            d[i] = 0.0;
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Exact minimum spanning tree of the mutual-reachability graph by Prim's
/// algorithm; edges `(i, j, w)` in insertion order.
pub fn mutual_reachability_mst(x: &[Vec<f64>], min_samples: usize) -> Vec<(usize, usize, f64)> {
    let n = x.len();
    if n < 2 {
        return vec![];
    }
    let core = core_distances(x, min_samples);
    let mr = |i: usize, j: usize| euclid(&x[i], &x[j]).max(core[i]).max(core[j]);
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = mr(current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if next == usize::MAX || best[j] < next_w {
                next = j;
                next_w = best[j];
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, next_w));
        current = next;
    }
    edges
}

struct Condensed {
    /// (parent cluster, child cluster or point, lambda, size); children with
    /// id < n are points.
    rows: Vec<(usize, usize, f64, usize)>,
    n_clusters: usize,
}

fn lambda_of(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        f64::INFINITY
    }
}

fn condense(n: usize, mut mst: Vec<(usize, usize, f64)>, mcs: usize) -> Condensed {
    mst.sort_by(|a, b| a.2.total_cmp(&b.2));
    // single-linkage dendrogram: node n + t merges two components at step t
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    let mut left = vec![0usize; n - 1];
    let mut right = vec![0usize; n - 1];
    let mut height = vec![0.0f64; n - 1];
    let mut size = vec![1usize; 2 * n - 1];
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    for (t, &(i, j, w)) in mst.iter().enumerate() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        let node = n + t;
        left[t] = a;
        right[t] = b;
        height[t] = w;
        size[node] = size[a] + size[b];
        parent[a] = node;
        parent[b] = node;
    }
    let root = 2 * n - 2;
    let leaves = |node: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v < n {
                out.push(v);
            } else {
                stack.push(right[v - n]);
                stack.push(left[v - n]);
            }
        }
        out
    };

    let mut rows = Vec::new();
    let mut next_label = n + 1;
    // (dendrogram node, condensed cluster label)
    let mut queue = std::collections::VecDeque::from([(root, n)]);
    while let Some((node, label)) = queue.pop_front() {
        if node < n {
            continue;
        }
        let t = node - n;
        let lambda = lambda_of(height[t]);
        let (l, r) = (left[t], right[t]);
        let (sl, sr) = (size[l], size[r]);
        match (sl >= mcs, sr >= mcs) {
            (true, true) => {
                for child in [l, r] {
                    rows.push((label, next_label, lambda, size[child]));
                    queue.push_back((child, next_label));
                    next_label += 1;
                }
            }
            (false, false) => {
                for child in [l, r] {
                    for p in leaves(child) {
                        rows.push((label, p, lambda, 1));
                    }
                }
            }
            (true, false) => {
                for p in leaves(r) {
                    rows.push((label, p, lambda, 1));
                }
                queue.push_back((l, label));
            }
            (false, true) => {
                for p in leaves(l) {
                    rows.push((label, p, lambda, 1));
                }
                queue.push_back((r, label));
            }
        }
    }
    Condensed {
        rows,
        n_clusters: next_label - n,
    }
}

fn excess(lambda: f64, birth: f64) -> f64 {
    if lambda == birth {
        0.0
    } else {
        lambda - birth
    }
}

/// Density clustering on euclidean distances with excess-of-mass or leaf
/// selection over the condensed cluster tree.
pub fn hdbscan(
    x: &[Vec<f64>],
    min_cluster_size: usize,
    min_samples: Option<usize>,
    selection: Selection,
) -> Result<ClusterLabels> {
    let n = x.len();
    if min_cluster_size < 2 {
        return Err(Error::Parameter(format!(
            "min_cluster_size must be >= 2, got {min_cluster_size}"
        )));
    }
    let min_samples = min_samples.unwrap_or(min_cluster_size);
    if min_samples < 1 {
        return Err(Error::Parameter("min_samples must be >= 1".into()));
    }
    if let Some(i) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain(format!("point {i} has a non-finite coordinate")));
    }
    if n < min_cluster_size || n < 2 {
        return Ok(ClusterLabels {
            labels: vec![-1; n],
            strengths: vec![0.0; n],
        });
    }
    let mst = mutual_reachability_mst(x, min_samples);
    let tree = condense(n, mst, min_cluster_size);
    let nc = tree.n_clusters;
    let idx = |c: usize| c - n;

    let mut birth = vec![0.0f64; nc];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for &(p, c, lambda, _) in &tree.rows {
        if c >= n {
            birth[idx(c)] = lambda;
            children[idx(p)].push(c);
        }
    }
    let mut stability = vec![0.0f64; nc];
    for &(p, _, lambda, sz) in &tree.rows {
        stability[idx(p)] += excess(lambda, birth[idx(p)]) * sz as f64;
    }

    let mut selected = vec![false; nc];
    let root_alone = children[0].is_empty();
    match selection {
        Selection::Leaf => {
            for c in 0..nc {
                selected[c] = children[c].is_empty() && (c > 0 || root_alone);
            }
        }
        Selection::Eom => {
            let mut subtree = stability.clone();
            // children always carry larger ids than their parent
            for c in (0..nc).rev() {
                if children[c].is_empty() {
                    selected[c] = c > 0 || root_alone;
                    continue;
                }
                let below: f64 = children[c].iter().map(|&ch| subtree[idx(ch)]).sum();
                if c > 0 && stability[c] >= below {
                    selected[c] = true;
                    let mut stack = children[c].clone();
                    while let Some(d) = stack.pop() {
                        selected[idx(d)] = false;
                        stack.extend(children[idx(d)].iter().copied());
                    }
                } else {
                    subtree[c] = below;
                }
            }
        }
    }

    // map every condensed cluster to its selected ancestor (or itself)
    let mut parent_of = vec![usize::MAX; nc];
    for c in 0..nc {
        for &ch in &children[c] {
            parent_of[idx(ch)] = c;
        }
    }
    let mut owner = vec![usize::MAX; nc];
    for c in 0..nc {
        let mut v = c;
        loop {
            if selected[v] {
                owner[c] = v;
                break;
            }
            if parent_of[v] == usize::MAX {
                break;
            }
            v = parent_of[v];
        }
    }
    let order: Vec<usize> = (0..nc).filter(|&c| selected[c]).collect();
    let mut label_of = vec![-1i64; nc];
    for (l, &c) in order.iter().enumerate() {
        label_of[c] = l as i64;
    }

    let mut labels = vec![-1i64; n];
    let mut point_lambda = vec![0.0f64; n];
    for &(p, c, lambda, _) in &tree.rows {
        if c < n {
            let o = owner[idx(p)];
            if o != usize::MAX {
                labels[c] = label_of[o];
                point_lambda[c] = lambda;
            }
        }
    }
    let mut max_lambda = vec![0.0f64; order.len()];
    for i in 0..n {
        if labels[i] >= 0 {
            let m = &mut max_lambda[labels[i] as usize];
            *m = m.max(point_lambda[i]);
        }
    }
    let strengths = (0..n)
        .map(|i| {
            if labels[i] < 0 {
                return 0.0;
            }
            let (lp, lm) = (point_lambda[i], max_lambda[labels[i] as usize]);
            if lm == 0.0 || !lp.is_finite() {
                1.0
            } else {
                lp.min(lm) / lm
            }
        })
        .collect();
    Ok(ClusterLabels { labels, strengths })
}
