//! NMF by Lee-Seung multiplicative updates on the Frobenius objective.
//!
//! Denominators are floored at `EPS`; a larger denominator only tightens the
//! auxiliary bound, so every update still cannot increase the objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WeightedDocTermMatrix;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::rank::{clip_top_n, top_terms, RankedTerms};

pub const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
    /// Early stop on relative objective change; 0 disables it.
    pub tol: f64,
    /// Multiplicative passes over each factor per iteration. The second and
    /// later passes reuse `W^T M` / `M H^T` and cost little.
    pub inner: usize,
    /// Row-parallel updates; results are identical to the serial path.
    pub parallel: bool,
}

impl NmfParams {
    pub fn new(k: usize, seed: u64) -> Self {
        NmfParams {
            k,
            iters: 500,
            seed,
            tol: 1e-6,
            inner: 10,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfModel {
    pub k: usize,
    /// n x K, row-major.
    pub w: Vec<Vec<f64>>,
    /// K x V, row-major.
    pub h: Vec<Vec<f64>>,
    /// Squared Frobenius error at initialization and after every iteration.
    pub objective_trace: Vec<f64>,
}

impl NmfModel {
    /// `||M - WH||_F / ||M||_F` (0 for an all-zero input).
    pub fn relative_error(&self, m: &WeightedDocTermMatrix) -> f64 {
        let total: f64 = m.rows().iter().flatten().map(|&(_, v)| v * v).sum();
        let err = self.objective_trace.last().copied().unwrap_or(0.0);
        if total == 0.0 {
            err.sqrt()
        } else {
            (err / total).sqrt()
        }
    }

    /// Highest-weight topic per document.
    pub fn dominant_topics(&self) -> Vec<usize> {
        self.w
            .iter()
            .map(|r| {
                (0..r.len())
                    .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
                    .unwrap_or(0)
            })
            .collect()
    }
}

fn map_rows<T: Send, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// `A^T A` for a row-major n x K matrix.
fn gram(a: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; k]; k];
    for row in a {
        for i in 0..k {
            for j in 0..k {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    g
}

/// `A A^T` for a row-major K x V matrix.
fn gram_rows(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut g = vec![vec![0.0; k]; k];
    for x in 0..k {
        for y in 0..k {
            g[x][y] = a[x].iter().zip(&a[y]).map(|(p, q)| p * q).sum();
        }
    }
    g
}

fn objective(m: &WeightedDocTermMatrix, w: &[Vec<f64>], h: &[Vec<f64>], parallel: bool) -> f64 {
    let k = h.len();
    // ||M - WH||^2 = sum_nz (M - WH)^2 + (||WH||^2 - sum_nz (WH)^2)
    let per_row: Vec<(f64, f64)> = map_rows(m.n_docs(), parallel, |i| {
        let mut resid = 0.0;
        let mut wh_nz = 0.0;
        for &(j, v) in m.row(i) {
            let wh: f64 = (0..k).map(|t| w[i][t] * h[t][j]).sum();
            resid += (v - wh) * (v - wh);
            wh_nz += wh * wh;
        }
        (resid, wh_nz)
    });
    let (resid, wh_nz) = per_row
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let wtw = gram(w, k);
    let hht = gram_rows(h);
    let wh_sq: f64 = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| wtw[a][b] * hht[a][b])
        .sum();
    resid + (wh_sq - wh_nz).max(0.0)
}

pub fn fit_nmf(m: &WeightedDocTermMatrix, params: &NmfParams) -> Result<NmfModel> {
    let (n, v, k) = (m.n_docs(), m.n_terms(), params.k);
    if k < 2 {
        return Err(Error::Parameter(format!("NMF needs K >= 2, got {k}")));
    }
    if params.inner == 0 {
        return Err(Error::Parameter("NMF needs at least one inner pass".into()));
    }
    if k > n.min(v) {
        return Err(Error::Parameter(format!(
            "K={k} exceeds min(n, V) = {}",
            n.min(v)
        )));
    }
    let total: f64 = m.rows().iter().flatten().map(|&(_, x)| x).sum();
    let non_empty = n - m.empty_rows().len();
    if total > 0.0 && non_empty < k {
        return Err(Error::Parameter(format!(
            "K={k} exceeds the {non_empty} non-empty row(s)"
        )));
    }
    let mean = total / (n * v) as f64;
    let scale = (mean / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.random::<f64>() * scale).collect())
        .collect();
    let mut h: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..v).map(|_| rng.random::<f64>() * scale).collect())
        .collect();

    let par = params.parallel;
    let mut trace = vec![objective(m, &w, &h, par)];
    for it in 0..params.iters {
        // H <- H * (W^T M) / (W^T W H), repeated with W fixed
        let wtw = gram(&w, k);
        let wtm: Vec<Vec<f64>> = map_rows(k, par, |t| {
            let mut num = vec![0.0; v];
            for (i, row) in m.rows().iter().enumerate() {
                let wit = w[i][t];
                for &(j, x) in row {
                    num[j] += wit * x;
                }
            }
            num
        });
        for _ in 0..params.inner {
            let cur = &h;
            let next: Vec<Vec<f64>> = map_rows(k, par, |t| {
                (0..v)
                    .map(|j| {
                        let den: f64 = (0..k).map(|s| wtw[t][s] * cur[s][j]).sum();
                        cur[t][j] * wtm[t][j] / den.max(EPS)
                    })
                    .collect()
            });
            h = next;
        }

        // W <- W * (M H^T) / (W H H^T), repeated with H fixed
        let hht = gram_rows(&h);
        let mht: Vec<Vec<f64>> = map_rows(n, par, |i| {
            let mut num = vec![0.0; k];
            for &(j, x) in m.row(i) {
                for t in 0..k {
                    num[t] += x * h[t][j];
                }
            }
            num
        });
        for _ in 0..params.inner {
            let cur = &w;
            let next: Vec<Vec<f64>> = map_rows(n, par, |i| {
                (0..k)
                    .map(|t| {
                        let den: f64 = (0..k).map(|s| cur[i][s] * hht[s][t]).sum();
                        cur[i][t] * mht[i][t] / den.max(EPS)
                    })
                    .collect()
            });
            w = next;
        }

        let obj = objective(m, &w, &h, par);
        if !obj.is_finite() {
            return Err(Error::Convergence(format!("non-finite objective at iteration {it}")));
        }
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if params.tol > 0.0 && prev > 0.0 && (prev - obj) / prev < params.tol {
            log::debug!("NMF converged after {} iterations", it + 1);
            break;
        }
    }
    Ok(NmfModel {
        k,
        w,
        h,
        objective_trace: trace,
    })
}

/// Per topic, the `top_n` highest-weighted terms of its `H` row.
pub fn nmf_topic_words(model: &NmfModel, vocab: &Vocabulary, top_n: usize) -> Vec<RankedTerms> {
    let n = clip_top_n(top_n, vocab.len());
    model.h.iter().map(|row| top_terms(row, vocab, n)).collect()
}
