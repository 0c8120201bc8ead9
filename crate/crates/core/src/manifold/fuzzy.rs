use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::embedding::NeighborList;
use crate::error::{Error, Result};

pub const SMOOTH_K_ITERS: usize = 64;
const SIGMA_FLOOR: f64 = 1e-8;

/// Symmetric fuzzy kNN graph. `directed` holds each point's calibrated
/// outgoing weights before symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub k: usize,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub directed: Vec<Vec<(usize, f64)>>,
    /// Per point, symmetric weights sorted by neighbor index.
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = &self.adjacency[i];
        row.binary_search_by_key(&j, |&(t, _)| t)
            .map_or(0.0, |p| row[p].1)
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in index order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// `|sum_j w_ij - log2(k)|` of the outgoing weights of point `i`.
    pub fn calibration_residual(&self, i: usize) -> f64 {
        let total: f64 = self.directed[i].iter().map(|&(_, w)| w).sum();
        (total - (self.k as f64).log2()).abs()
    }
}

fn calibrate(dists: &[f64], k: usize) -> (f64, f64, Vec<f64>) {
    let target = (k as f64).log2();
    let rho = dists[0];
    let max = dists.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        // every neighbor coincides with the point
        return (0.0, 1.0, vec![1.0; dists.len()]);
    }
    let mass = |sigma: f64| -> f64 {
        dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
    };
    let ties = dists.iter().filter(|&&d| d <= rho).count();
    let (mut lo, mut hi) = (SIGMA_FLOOR, max * k as f64);
    for _ in 0..SMOOTH_K_ITERS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let mut w: Vec<f64> = dists
        .iter()
        .map(|&d| (-(d - rho).max(0.0) / sigma).exp())
        .collect();
    if ties as f64 >= target {
        // the tied nearest neighbors alone exceed the target mass; rescale
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= target / s);
    }
    (rho, sigma, w)
}

pub fn fuzzy_graph(nbrs: &NeighborList) -> Result<FuzzyGraph> {
    let (n, k) = (nbrs.n(), nbrs.k);
    if k < 2 {
        return Err(Error::Parameter(format!("fuzzy graph needs k >= 2, got {k}")));
    }
    if let Some(i) = (0..n).find(|&i| nbrs.indices[i].len() != k || nbrs.distances[i].len() != k) {
        return Err(Error::Validation(format!("point {i} does not have {k} neighbors")));
    }
    let calibrated: Vec<(f64, f64, Vec<f64>)> = nbrs
        .distances
        .par_iter()
        .map(|d| calibrate(d, k))
        .collect();
    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut directed = Vec::with_capacity(n);
    for (i, (r, s, w)) in calibrated.into_iter().enumerate() {
        rho.push(r);
        sigma.push(s);
        directed.push(nbrs.indices[i].iter().copied().zip(w).collect::<Vec<_>>());
    }
    // directed lookup: w(i -> j)
    let mut out_sorted: Vec<Vec<(usize, f64)>> = directed.clone();
    for row in &mut out_sorted {
        row.sort_by_key(|&(j, _)| j);
    }
    let lookup = |i: usize, j: usize| -> f64 {
        let row = &out_sorted[i];
        row.binary_search_by_key(&j, |&(t, _)| t)
            .map_or(0.0, |p| row[p].1)
    };
    let pairs: BTreeSet<(usize, usize)> = (0..n)
        .flat_map(|i| out_sorted[i].iter().map(move |&(j, _)| (i.min(j), i.max(j))))
        .filter(|&(a, b)| a != b)
        .collect();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (a, b) in pairs {
        let (wa, wb) = (lookup(a, b), lookup(b, a));
        let w = wa + wb - wa * wb;
        if w > 0.0 {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
    }
    for row in &mut adjacency {
        row.sort_by_key(|&(j, _)| j);
    }
    Ok(FuzzyGraph {
        n,
        k,
        rho,
        sigma,
        directed,
        adjacency,
    })
}
