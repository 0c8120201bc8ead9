use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fuzzy::FuzzyGraph;
use crate::embedding::splitmix;
use crate::error::{Error, Result};

const INIT_EXTENT: f64 = 10.0;
const CLIP: f64 = 4.0;
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceParams {
    pub n_components: usize,
    pub epochs: usize,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    pub negative_samples: usize,
    pub learning_rate: f64,
    /// Lock-free parallel edge updates; not reproducible run to run.
    pub parallel: bool,
}

impl ReduceParams {
    pub fn new(n_components: usize, a: f64, b: f64, seed: u64) -> Self {
        ReduceParams {
            n_components,
            epochs: 200,
            seed,
            a,
            b,
            negative_samples: 5,
            learning_rate: 1.0,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedEmbedding {
    pub points: Vec<Vec<f64>>,
}

impl ReducedEmbedding {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

/// Scores on the first `m` principal components, each column's largest
/// magnitude entry made positive. Components beyond the data rank are zero.
pub fn pca_init(data: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    if n == 0 {
        return vec![];
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let mut scores = vec![vec![0.0; m]; n];
    // eigen-decompose whichever Gram matrix is smaller
    let (values, vectors, dual) = if d <= n {
        let e = SymmetricEigen::new(x.transpose() * &x);
        (e.eigenvalues, e.eigenvectors, false)
    } else {
        let e = SymmetricEigen::new(&x * x.transpose());
        (e.eigenvalues, e.eigenvectors, true)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&p, &q| values[q].total_cmp(&values[p]).then(p.cmp(&q)));
    let scale = values.iter().copied().fold(0.0f64, f64::max).max(1e-300);
    for (c, &e) in order.iter().take(m).enumerate() {
        if values[e] <= 1e-12 * scale {
            break;
        }
        let col: Vec<f64> = if dual {
            let s = values[e].sqrt();
            (0..n).map(|i| vectors[(i, e)] * s).collect()
        } else {
            (0..n)
                .map(|i| (0..d).map(|j| x[(i, j)] * vectors[(j, e)]).sum())
                .collect()
        };
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            scores[i][c] = sign * col[i];
        }
    }
    scores
}

struct Edge {
    head: usize,
    tail: usize,
    every: f64,
    next: f64,
    every_neg: f64,
    next_neg: f64,
}

struct Coords {
    dim: usize,
    cells: Vec<AtomicU64>,
}

impl Coords {
    fn get(&self, i: usize, c: usize) -> f64 {
        f64::from_bits(self.cells[i * self.dim + c].load(Ordering::Relaxed))
    }

    fn add(&self, i: usize, c: usize, v: f64) {
        let cell = &self.cells[i * self.dim + c];
        let cur = f64::from_bits(cell.load(Ordering::Relaxed));
        cell.store((cur + v).to_bits(), Ordering::Relaxed);
    }
}

struct Sgd<'a> {
    coords: &'a Coords,
    a: f64,
    b: f64,
    n: usize,
}

impl Sgd<'_> {
    fn dist2(&self, i: usize, j: usize) -> f64 {
        (0..self.coords.dim)
            .map(|c| {
                let d = self.coords.get(i, c) - self.coords.get(j, c);
                d * d
            })
            .sum()
    }

    fn run(&self, edges: &mut [Edge], epoch: usize, alpha: f64, rng: &mut ChaCha8Rng) {
        let (a, b, dim) = (self.a, self.b, self.coords.dim);
        let now = epoch as f64;
        for e in edges.iter_mut() {
            if e.next > now {
                continue;
            }
            let (h, t) = (e.head, e.tail);
            let d2 = self.dist2(h, t);
            if d2 > 0.0 {
                let coef = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                for c in 0..dim {
                    let g = (coef * (self.coords.get(h, c) - self.coords.get(t, c))).clamp(-CLIP, CLIP);
                    self.coords.add(h, c, g * alpha);
                    self.coords.add(t, c, -g * alpha);
                }
            }
            e.next += e.every;
            let n_neg = ((now - e.next_neg) / e.every_neg).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..self.n);
                if k == h {
                    continue;
                }
                let d2 = self.dist2(h, k);
                let coef = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for c in 0..dim {
                    let g = if coef > 0.0 {
                        (coef * (self.coords.get(h, c) - self.coords.get(k, c))).clamp(-CLIP, CLIP)
                    } else {
                        CLIP
                    };
                    self.coords.add(h, c, g * alpha);
                }
            }
            e.next_neg += n_neg as f64 * e.every_neg;
        }
    }
}

/// Stochastic layout of the fuzzy graph in `n_components` dimensions,
/// initialised from the principal components of `data` (the original
/// embedding rows, one per graph vertex).
pub fn reduce(graph: &FuzzyGraph, data: &[Vec<f64>], params: &ReduceParams) -> Result<ReducedEmbedding> {
    let (n, m) = (graph.n, params.n_components);
    if m < 2 {
        return Err(Error::Parameter(format!("n_components must be >= 2, got {m}")));
    }
    if params.epochs < 50 {
        return Err(Error::Parameter(format!("epochs must be >= 50, got {}", params.epochs)));
    }
    if data.len() != n {
        return Err(Error::Validation(format!(
            "graph has {n} vertices but {} data rows were given",
            data.len()
        )));
    }
    if !(params.a > 0.0 && params.b > 0.0 && params.learning_rate > 0.0) {
        return Err(Error::Parameter("a, b and learning_rate must be positive".into()));
    }

    let mut init = pca_init(data, m);
    let extent = init
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(params.seed);
    noise_rng.set_stream(1);
    let noise = Normal::new(0.0, 1e-4).unwrap();
    for row in &mut init {
        for v in row.iter_mut() {
            if extent > 0.0 {
                *v *= INIT_EXTENT / extent;
            }
            *v += noise.sample(&mut noise_rng);
        }
    }
    let coords = Coords {
        dim: m,
        cells: init.iter().flatten().map(|v| AtomicU64::new(v.to_bits())).collect(),
    };

    let w_max = graph
        .adjacency
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &(_, w)| acc.max(w));
    let floor = w_max / params.epochs as f64;
    let neg_rate = params.negative_samples as f64;
    let mut edges: Vec<Edge> = Vec::new();
    for (i, row) in graph.adjacency.iter().enumerate() {
        for &(j, w) in row {
            if w < floor || w <= 0.0 {
                continue;
            }
            let every = w_max / w;
            let every_neg = if neg_rate > 0.0 { every / neg_rate } else { f64::INFINITY };
            edges.push(Edge {
                head: i,
                tail: j,
                every,
                next: every,
                every_neg,
                next_neg: every_neg,
            });
        }
    }

    let sgd = Sgd {
        coords: &coords,
        a: params.a,
        b: params.b,
        n,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for epoch in 0..params.epochs {
        let alpha = params.learning_rate * (1.0 - epoch as f64 / params.epochs as f64);
        if params.parallel {
            edges.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let s = splitmix(params.seed ^ splitmix(((epoch as u64) << 32) | c as u64));
                let mut local = ChaCha8Rng::seed_from_u64(s);
                sgd.run(chunk, epoch, alpha, &mut local);
            });
        } else {
            sgd.run(&mut edges, epoch, alpha, &mut rng);
        }
    }

    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..m).map(|c| coords.get(i, c)).collect())
        .collect();
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Convergence("layout produced non-finite coordinates".into()));
    }
    Ok(ReducedEmbedding { points })
}
