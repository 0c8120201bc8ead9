//! Batch variational Bayes for LDA.
//!
//! Document-topic parameters are warm-started across epochs, so every E-step
//! is coordinate ascent from the previous optimum and the evidence lower
//! bound cannot decrease. Real-valued weights are accepted as fractional
//! counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::WeightedDocTermMatrix;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::rank::{clip_top_n, top_terms, RankedTerms};

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document-topic prior, `1/K` when unset.
    pub alpha: Option<f64>,
    /// Symmetric topic-word prior, `1/K` when unset.
    pub eta: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    /// Early stop on relative bound change.
    pub tol: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl LdaParams {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaParams {
            k,
            alpha: None,
            eta: None,
            epochs: 50,
            seed,
            tol: 1e-6,
            inner_tol: 1e-4,
            max_inner: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    /// K x V variational topic-word parameters.
    pub topic_word: Vec<Vec<f64>>,
    /// n x K variational document-topic parameters.
    pub doc_topic: Vec<Vec<f64>>,
    /// Evidence lower bound after each epoch.
    pub bound_trace: Vec<f64>,
}

impl LdaModel {
    /// Topic-word distributions (rows of `topic_word` normalized).
    pub fn topic_distributions(&self) -> Vec<Vec<f64>> {
        self.topic_word.iter().map(|r| normalized(r)).collect()
    }

    pub fn doc_distributions(&self) -> Vec<Vec<f64>> {
        self.doc_topic.iter().map(|r| normalized(r)).collect()
    }

    /// Most probable topic per document.
    pub fn dominant_topics(&self) -> Vec<usize> {
        self.doc_topic
            .iter()
            .map(|g| {
                (0..g.len())
                    .max_by(|&a, &b| g[a].total_cmp(&g[b]).then(b.cmp(&a)))
                    .unwrap_or(0)
            })
            .collect()
    }
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter().map(|v| v / s).collect()
}

/// `E[log X]` for `X ~ Dirichlet(params)`.
fn dirichlet_expectation(params: &[f64]) -> Vec<f64> {
    let total = digamma(params.iter().sum());
    params.iter().map(|&p| digamma(p) - total).collect()
}

struct EStepChunk {
    gammas: Vec<Vec<f64>>,
    /// K x V partial sufficient statistics (before the exp(E log beta) factor).
    sstats: Vec<Vec<f64>>,
}

struct Fitter<'a> {
    m: &'a WeightedDocTermMatrix,
    k: usize,
    alpha: f64,
    eta: f64,
    inner_tol: f64,
    max_inner: usize,
}

impl Fitter<'_> {
    fn doc_step(
        &self,
        row: &[(usize, f64)],
        gamma: &mut [f64],
        exp_elog_beta: &[Vec<f64>],
        sstats: &mut [Vec<f64>],
    ) {
        if row.is_empty() {
            gamma.iter_mut().for_each(|g| *g = self.alpha);
            return;
        }
        let k = self.k;
        let mut exp_theta: Vec<f64> = dirichlet_expectation(gamma).into_iter().map(f64::exp).collect();
        let phinorm = |exp_theta: &[f64]| -> Vec<f64> {
            row.iter()
                .map(|&(w, _)| (0..k).map(|t| exp_theta[t] * exp_elog_beta[t][w]).sum::<f64>() + 1e-100)
                .collect()
        };
        let mut norm = phinorm(&exp_theta);
        for _ in 0..self.max_inner {
            let mut change = 0.0;
            for t in 0..k {
                let acc: f64 = row
                    .iter()
                    .zip(&norm)
                    .map(|(&(w, c), &z)| c / z * exp_elog_beta[t][w])
                    .sum();
                let updated = self.alpha + exp_theta[t] * acc;
                change += (updated - gamma[t]).abs();
                gamma[t] = updated;
            }
            exp_theta = dirichlet_expectation(gamma).into_iter().map(f64::exp).collect();
            norm = phinorm(&exp_theta);
            if change / (k as f64) < self.inner_tol {
                break;
            }
        }
        for t in 0..k {
            for (&(w, c), &z) in row.iter().zip(&norm) {
                sstats[t][w] += exp_theta[t] * c / z;
            }
        }
    }

    fn e_step(&self, gammas: &[Vec<f64>], exp_elog_beta: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let v = self.m.n_terms();
        let chunks: Vec<EStepChunk> = self
            .m
            .rows()
            .par_chunks(CHUNK)
            .zip(gammas.par_chunks(CHUNK))
            .map(|(rows, gs)| {
                let mut sstats = vec![vec![0.0; v]; self.k];
                let gammas = rows
                    .iter()
                    .zip(gs)
                    .map(|(row, g)| {
                        let mut g = g.clone();
                        self.doc_step(row, &mut g, exp_elog_beta, &mut sstats);
                        g
                    })
                    .collect();
                EStepChunk { gammas, sstats }
            })
            .collect();
        let mut sstats = vec![vec![0.0; v]; self.k];
        let mut new_gammas = Vec::with_capacity(gammas.len());
        for c in chunks {
            for (acc, part) in sstats.iter_mut().zip(&c.sstats) {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
            }
            new_gammas.extend(c.gammas);
        }
        (new_gammas, sstats)
    }

    fn bound(&self, gammas: &[Vec<f64>], lambda: &[Vec<f64>]) -> f64 {
        let k = self.k;
        let v = self.m.n_terms();
        let elog_beta: Vec<Vec<f64>> = lambda.iter().map(|r| dirichlet_expectation(r)).collect();
        let doc_part: f64 = self
            .m
            .rows()
            .par_iter()
            .zip(gammas.par_iter())
            .map(|(row, gamma)| {
                let elog_theta = dirichlet_expectation(gamma);
                let mut s = 0.0;
                for &(w, c) in row {
                    let terms: Vec<f64> = (0..k).map(|t| elog_theta[t] + elog_beta[t][w]).collect();
                    s += c * log_sum_exp(&terms);
                }
                for t in 0..k {
                    s += (self.alpha - gamma[t]) * elog_theta[t] + ln_gamma(gamma[t]) - ln_gamma(self.alpha);
                }
                s += ln_gamma(self.alpha * k as f64) - ln_gamma(gamma.iter().sum());
                s
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        let mut topic_part = 0.0;
        for t in 0..k {
            for w in 0..v {
                topic_part += (self.eta - lambda[t][w]) * elog_beta[t][w] + ln_gamma(lambda[t][w]) - ln_gamma(self.eta);
            }
            topic_part += ln_gamma(self.eta * v as f64) - ln_gamma(lambda[t].iter().sum());
        }
        doc_part + topic_part
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn fit_lda(m: &WeightedDocTermMatrix, params: &LdaParams) -> Result<LdaModel> {
    let k = params.k;
    if k < 2 {
        return Err(Error::Parameter(format!("LDA needs K >= 2, got {k}")));
    }
    let effective = m.effective_terms();
    if k > effective {
        return Err(Error::Parameter(format!(
            "K={k} exceeds the effective vocabulary of {effective} term(s)"
        )));
    }
    if params.epochs == 0 {
        return Err(Error::Parameter("LDA needs at least one epoch".into()));
    }
    let alpha = params.alpha.unwrap_or(1.0 / k as f64);
    let eta = params.eta.unwrap_or(1.0 / k as f64);
    if !(alpha > 0.0 && eta > 0.0) {
        return Err(Error::Parameter("alpha and eta must be positive".into()));
    }
    let v = m.n_terms();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Gamma::new(100.0, 0.01).expect("valid gamma parameters");
    let mut lambda: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..v).map(|_| init.sample(&mut rng)).collect())
        .collect();
    let mut gammas: Vec<Vec<f64>> = (0..m.n_docs())
        .map(|_| (0..k).map(|_| init.sample(&mut rng)).collect())
        .collect();

    let fitter = Fitter {
        m,
        k,
        alpha,
        eta,
        inner_tol: params.inner_tol,
        max_inner: params.max_inner,
    };
    let mut trace: Vec<f64> = Vec::new();
    for epoch in 0..params.epochs {
        let exp_elog_beta: Vec<Vec<f64>> = lambda
            .iter()
            .map(|r| dirichlet_expectation(r).into_iter().map(f64::exp).collect())
            .collect();
        let (new_gammas, sstats) = fitter.e_step(&gammas, &exp_elog_beta);
        gammas = new_gammas;
        for t in 0..k {
            for w in 0..v {
                lambda[t][w] = eta + sstats[t][w] * exp_elog_beta[t][w];
            }
        }
        let bound = fitter.bound(&gammas, &lambda);
        if !bound.is_finite() {
            return Err(Error::Convergence(format!("non-finite bound at epoch {epoch}")));
        }
        let prev = trace.last().copied();
        trace.push(bound);
        if let Some(p) = prev {
            if ((bound - p) / p.abs().max(f64::MIN_POSITIVE)).abs() < params.tol {
                log::debug!("LDA converged after {} epochs", epoch + 1);
                break;
            }
        }
    }
    Ok(LdaModel {
        k,
        alpha,
        eta,
        topic_word: lambda,
        doc_topic: gammas,
        bound_trace: trace,
    })
}

/// Per topic, the `top_n` most probable terms (ties by term).
pub fn lda_topic_words(model: &LdaModel, vocab: &Vocabulary, top_n: usize) -> Vec<RankedTerms> {
    let n = clip_top_n(top_n, vocab.len());
    model
        .topic_distributions()
        .iter()
        .map(|p| top_terms(p, vocab, n))
        .collect()
}
