//! Tree-structured Parzen estimator search with a persisted trials history.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cluster::{fit_cluster_model, ClusterSettings};
use crate::corpus::{TokenizedDocument, Vocabulary};
use crate::embedding::splitmix;
use crate::evaluation::{npmi_coherence, topic_diversity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Choice(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Choice(v) => f.write_str(v),
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    UniformInt { lo: i64, hi: i64 },
    Uniform { lo: f64, hi: f64 },
    Choice { options: Vec<String> },
}

impl Domain {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Domain::UniformInt { lo, hi } => lo < hi,
            Domain::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            Domain::Choice { options } => !options.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("parameter '{name}' has an empty or inverted domain")))
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (Domain::UniformInt { lo, hi }, ParamValue::Int(x)) => lo <= x && x <= hi,
            (Domain::Uniform { lo, hi }, ParamValue::Float(x)) => lo <= x && x <= hi,
            (Domain::Choice { options }, ParamValue::Choice(x)) => options.contains(x),
            _ => false,
        }
    }

    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> ParamValue {
        match self {
            Domain::UniformInt { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            Domain::Uniform { lo, hi } => ParamValue::Float(rng.random_range(*lo..*hi)),
            Domain::Choice { options } => ParamValue::Choice(options[rng.random_range(0..options.len())].clone()),
        }
    }
}

/// `lhs <= rhs` between two integer or real parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LessEqual {
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: BTreeMap<String, Domain>,
    #[serde(default)]
    pub constraints: Vec<LessEqual>,
}

impl SearchSpace {
    pub fn new(params: BTreeMap<String, Domain>, constraints: Vec<LessEqual>) -> Result<Self> {
        let space = SearchSpace { params, constraints };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Parameter("search space is empty".into()));
        }
        for (name, d) in &self.params {
            d.validate(name)?;
        }
        for c in &self.constraints {
            for side in [&c.lhs, &c.rhs] {
                match self.params.get(side) {
                    Some(Domain::Choice { .. }) | None => {
                        return Err(Error::Parameter(format!(
                            "constraint {} <= {} refers to a missing or categorical parameter",
                            c.lhs, c.rhs
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// The five tuned parameters of the embedding-cluster model, with
    /// `min_samples <= min_cluster_size`.
    pub fn default_topic_space() -> Self {
        let int = |lo, hi| Domain::UniformInt { lo, hi };
        let params = BTreeMap::from([
            ("min_topic_size".to_string(), int(10, 60)),
            ("n_neighbors".to_string(), int(5, 50)),
            ("n_components".to_string(), int(2, 15)),
            ("min_cluster_size".to_string(), int(10, 60)),
            ("min_samples".to_string(), int(5, 40)),
        ]);
        SearchSpace {
            params,
            constraints: vec![LessEqual {
                lhs: "min_samples".into(),
                rhs: "min_cluster_size".into(),
            }],
        }
    }

    pub fn satisfied(&self, p: &Params) -> bool {
        self.constraints.iter().all(|c| match (p.get(&c.lhs), p.get(&c.rhs)) {
            (Some(a), Some(b)) => a.as_f64() <= b.as_f64(),
            _ => true,
        })
    }

    pub fn contains(&self, p: &Params) -> bool {
        self.params
            .iter()
            .all(|(n, d)| p.get(n).is_some_and(|v| d.contains(v)))
            && self.satisfied(p)
    }

    /// Forces violated constraints by lowering the left-hand side.
    fn repair(&self, p: &mut Params) {
        for c in &self.constraints {
            if let (Some(a), Some(b)) = (p.get(&c.lhs).cloned(), p.get(&c.rhs).cloned()) {
                if a.as_f64() > b.as_f64() {
                    let fixed = match (&self.params[&c.lhs], &b) {
                        (Domain::UniformInt { lo, .. }, ParamValue::Int(v)) => ParamValue::Int((*v).max(*lo)),
                        (Domain::UniformInt { lo, .. }, ParamValue::Float(v)) => ParamValue::Int((v.floor() as i64).max(*lo)),
                        (Domain::Uniform { lo, .. }, v) => ParamValue::Float(v.as_f64().unwrap().max(*lo)),
                        _ => a,
                    };
                    p.insert(c.lhs.clone(), fixed);
                }
            }
        }
    }

    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Params {
        for _ in 0..1000 {
            let p: Params = self
                .params
                .iter()
                .map(|(n, d)| (n.clone(), d.sample_prior(rng)))
                .collect();
            if self.satisfied(&p) {
                return p;
            }
        }
        let mut p: Params = self
            .params
            .iter()
            .map(|(n, d)| (n.clone(), d.sample_prior(rng)))
            .collect();
        self.repair(&mut p);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    /// Present exactly when the trial succeeded.
    pub loss: Option<f64>,
    pub status: TrialStatus,
    pub duration_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trials {
    pub trials: Vec<Trial>,
}

impl Trials {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Successful trials in execution order.
    pub fn ok(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.status == TrialStatus::Ok)
    }

    /// Position of the lowest finite loss, earliest on ties.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, t) in self.trials.iter().enumerate() {
            if let (TrialStatus::Ok, Some(l)) = (t.status, t.loss) {
                if best.is_none_or(|(b, _)| l < b) {
                    best = Some((l, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best_index().map(|i| &self.trials[i])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut trials = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Trial = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e))?;
            trials.push(t);
        }
        Ok(Trials { trials })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(t).map_err(|e| Error::Format(e.to_string()))?);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    fn append(path: &Path, t: &Trial) -> Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let line = serde_json::to_string(t).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        f.sync_data().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeParams {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
}

impl Default for TpeParams {
    fn default() -> Self {
        TpeParams {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
        }
    }
}

/// One-dimensional Parzen density over a parameter's domain.
#[derive(Debug, Clone)]
pub enum Parzen {
    Numeric {
        lo: f64,
        hi: f64,
        integer: bool,
        mus: Vec<f64>,
        sigma: f64,
    },
    Categorical {
        options: Vec<String>,
        probs: Vec<f64>,
    },
}

fn phi(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

impl Parzen {
    pub fn fit(domain: &Domain, obs: &[&ParamValue]) -> Self {
        match domain {
            Domain::Choice { options } => {
                let mut counts = vec![1.0; options.len()];
                for v in obs {
                    if let ParamValue::Choice(c) = v {
                        if let Some(i) = options.iter().position(|o| o == c) {
                            counts[i] += 1.0;
                        }
                    }
                }
                let total: f64 = counts.iter().sum();
                Parzen::Categorical {
                    options: options.clone(),
                    probs: counts.into_iter().map(|c| c / total).collect(),
                }
            }
            Domain::UniformInt { lo, hi } => Self::numeric(*lo as f64, *hi as f64, true, obs),
            Domain::Uniform { lo, hi } => Self::numeric(*lo, *hi, false, obs),
        }
    }

    fn numeric(lo: f64, hi: f64, integer: bool, obs: &[&ParamValue]) -> Self {
        let mus: Vec<f64> = obs.iter().filter_map(|v| v.as_f64()).collect();
        let sigma = (hi - lo) / (mus.len().max(1) as f64).sqrt();
        Parzen::Numeric {
            lo,
            hi,
            integer,
            mus,
            sigma,
        }
    }

    /// Bandwidth of a numeric estimator.
    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            Parzen::Numeric { sigma, .. } => Some(*sigma),
            Parzen::Categorical { .. } => None,
        }
    }

    /// Density (continuous) or probability mass (integer / categorical).
    pub fn density(&self, v: &ParamValue) -> f64 {
        match self {
            Parzen::Categorical { options, probs } => match v {
                ParamValue::Choice(c) => options.iter().position(|o| o == c).map_or(0.0, |i| probs[i]),
                _ => 0.0,
            },
            Parzen::Numeric {
                lo,
                hi,
                integer,
                mus,
                sigma,
            } => {
                let x = match v.as_f64() {
                    Some(x) => x,
                    None => return 0.0,
                };
                if x < *lo || x > *hi {
                    return 0.0;
                }
                if mus.is_empty() {
                    return if *integer { 1.0 / (hi - lo + 1.0) } else { 1.0 / (hi - lo) };
                }
                let (a, b) = if *integer { (lo - 0.5, hi + 0.5) } else { (*lo, *hi) };
                let total: f64 = mus
                    .iter()
                    .map(|&mu| {
                        let z = (phi((b - mu) / sigma) - phi((a - mu) / sigma)).max(1e-300);
                        if *integer {
                            (phi((x + 0.5 - mu) / sigma) - phi((x - 0.5 - mu) / sigma)) / z
                        } else {
                            let t = (x - mu) / sigma;
                            (-0.5 * t * t).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()) / z
                        }
                    })
                    .sum();
                total / mus.len() as f64
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> ParamValue {
        match self {
            Parzen::Categorical { options, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (o, p) in options.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return ParamValue::Choice(o.clone());
                    }
                }
                ParamValue::Choice(options.last().unwrap().clone())
            }
            Parzen::Numeric {
                lo,
                hi,
                integer,
                mus,
                sigma,
            } => {
                let (a, b) = if *integer { (lo - 0.5, hi + 0.5) } else { (*lo, *hi) };
                let x = if mus.is_empty() {
                    rng.random_range(a..b)
                } else {
                    let mu = mus[rng.random_range(0..mus.len())];
                    let (pa, pb) = (phi((a - mu) / sigma), phi((b - mu) / sigma));
                    let u: f64 = rng.random();
                    let std = Normal::new(0.0, 1.0).unwrap();
                    if pb - pa > 1e-12 {
                        (mu + sigma * std.inverse_cdf(pa + u * (pb - pa))).clamp(a, b)
                    } else {
                        a + u * (b - a)
                    }
                };
                if *integer {
                    ParamValue::Int((x.round() as i64).clamp(*lo as i64, *hi as i64))
                } else {
                    ParamValue::Float(x.clamp(*lo, *hi))
                }
            }
        }
    }
}

/// Sizes of the good / rest split for `n_ok` successful trials.
pub fn split_sizes(n_ok: usize, gamma: f64) -> (usize, usize) {
    if n_ok == 0 {
        return (0, 0);
    }
    let below = ((gamma * n_ok as f64).ceil() as usize).clamp(1, n_ok);
    (below, n_ok - below)
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index as u64 + 1)))
}

/// Next configuration to evaluate, given the history so far.
pub fn tpe_suggest(trials: &Trials, space: &SearchSpace, tpe: &TpeParams, seed: u64) -> Result<Params> {
    space.validate()?;
    if !(tpe.gamma > 0.0 && tpe.gamma <= 1.0) || tpe.n_candidates == 0 {
        return Err(Error::Parameter("gamma must lie in (0, 1] and n_candidates >= 1".into()));
    }
    let mut rng = trial_rng(seed, trials.len());
    let mut ok: Vec<&Trial> = trials.ok().collect();
    if trials.len() < tpe.n_startup || ok.is_empty() {
        return Ok(space.sample_prior(&mut rng));
    }
    ok.sort_by(|a, b| {
        a.loss
            .unwrap_or(f64::INFINITY)
            .total_cmp(&b.loss.unwrap_or(f64::INFINITY))
            .then(a.index.cmp(&b.index))
    });
    let (below, _) = split_sizes(ok.len(), tpe.gamma);
    let (good, rest) = ok.split_at(below);
    let models: Vec<(&String, Parzen, Parzen)> = space
        .params
        .iter()
        .map(|(name, d)| {
            let l: Vec<&ParamValue> = good.iter().filter_map(|t| t.params.get(name)).collect();
            let g: Vec<&ParamValue> = rest.iter().filter_map(|t| t.params.get(name)).collect();
            (name, Parzen::fit(d, &l), Parzen::fit(d, &g))
        })
        .collect();
    let mut best: Option<(f64, Params)> = None;
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < tpe.n_candidates && attempts < tpe.n_candidates * 50 {
        attempts += 1;
        let cand: Params = models
            .iter()
            .map(|(n, l, _)| ((*n).clone(), l.sample(&mut rng)))
            .collect();
        if !space.satisfied(&cand) {
            continue;
        }
        drawn += 1;
        let score: f64 = models
            .iter()
            .map(|(n, l, g)| {
                let v = &cand[*n];
                l.density(v).max(1e-300).ln() - g.density(v).max(1e-300).ln()
            })
            .sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    Ok(match best {
        Some((_, p)) => p,
        None => space.sample_prior(&mut rng),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FminOptions {
    pub max_evals: usize,
    pub seed: u64,
    pub tpe: TpeParams,
    /// Trials file, appended after every evaluation and resumed from when it
    /// already exists.
    pub trials_path: Option<PathBuf>,
}

impl FminOptions {
    pub fn new(max_evals: usize, seed: u64) -> Self {
        FminOptions {
            max_evals,
            seed,
            tpe: TpeParams::default(),
            trials_path: None,
        }
    }
}

/// Minimizes `objective` over `space`. Failed or non-finite evaluations are
/// recorded but never modeled.
pub fn fmin<F>(mut objective: F, space: &SearchSpace, opts: &FminOptions) -> Result<(Params, Trials)>
where
    F: FnMut(&Params) -> Result<f64>,
{
    if opts.max_evals == 0 {
        return Err(Error::Parameter("max_evals must be >= 1".into()));
    }
    space.validate()?;
    let mut trials = match &opts.trials_path {
        Some(p) if p.exists() => Trials::load(p)?,
        _ => Trials::default(),
    };
    if !trials.is_empty() {
        log::info!("resuming from {} recorded trial(s)", trials.len());
    }
    while trials.len() < opts.max_evals {
        let params = tpe_suggest(&trials, space, &opts.tpe, opts.seed)?;
        let start = Instant::now();
        let outcome = objective(&params);
        let duration_seconds = start.elapsed().as_secs_f64();
        let (loss, status, error) = match outcome {
            Ok(l) if l.is_finite() => (Some(l), TrialStatus::Ok, None),
            Ok(l) => (None, TrialStatus::Failed, Some(format!("non-finite loss {l}"))),
            Err(e) => (None, TrialStatus::Failed, Some(e.to_string())),
        };
        let trial = Trial {
            index: trials.len(),
            params,
            loss,
            status,
            duration_seconds,
            error,
        };
        log::info!(
            "trial {}: {}",
            trial.index,
            trial.loss.map_or_else(|| "failed".to_string(), |l| format!("loss {l:.4}"))
        );
        if let Some(p) = &opts.trials_path {
            Trials::append(p, &trial)?;
        }
        trials.trials.push(trial);
    }
    match trials.best() {
        Some(t) => Ok((t.params.clone(), trials)),
        None => Err(Error::NoViableConfiguration(trials.len())),
    }
}

/// `-(w_tc TC + w_td TD)`, or the +1 penalty when fewer than two topics
/// survive.
pub fn topic_quality_loss(tc: f64, td: f64, n_topics: usize, w_tc: f64, w_td: f64) -> f64 {
    if n_topics < 2 {
        1.0
    } else {
        -(w_tc * tc + w_td * td)
    }
}

/// Names the objective understands, in the order they are applied.
pub const TUNED_PARAMS: [&str; 5] = [
    "min_topic_size",
    "n_neighbors",
    "n_components",
    "min_cluster_size",
    "min_samples",
];

/// Copies tuned values onto `base`. Unknown names are an error.
pub fn apply_params(base: &ClusterSettings, params: &Params) -> Result<ClusterSettings> {
    let mut s = base.clone();
    for (name, v) in params {
        let n = v
            .as_i64()
            .filter(|&x| x >= 1)
            .ok_or_else(|| Error::Parameter(format!("parameter '{name}' must be a positive integer, got {v}")))?
            as usize;
        match name.as_str() {
            "min_topic_size" => s.min_topic_size = Some(n),
            "n_neighbors" => s.n_neighbors = n,
            "n_components" => s.n_components = n,
            "min_cluster_size" => s.min_cluster_size = n,
            "min_samples" => s.min_samples = Some(n),
            other => return Err(Error::Parameter(format!("unknown tuned parameter '{other}'"))),
        }
    }
    Ok(s)
}

/// Scoring settings for [`objective_topic_quality`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityWeights {
    pub w_tc: f64,
    pub w_td: f64,
    pub window: usize,
    pub top_k: usize,
}

impl Default for QualityWeights {
    fn default() -> Self {
        QualityWeights {
            w_tc: 1.0,
            w_td: 1.0,
            window: crate::evaluation::DEFAULT_WINDOW,
            top_k: 10,
        }
    }
}

/// Fits the cluster model under `params` and scores its keywords.
pub fn objective_topic_quality(
    params: &Params,
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    embeddings: &[Vec<f64>],
    base: &ClusterSettings,
    weights: &QualityWeights,
    seed: u64,
) -> Result<f64> {
    let settings = apply_params(base, params)?;
    let fit = fit_cluster_model(docs, vocab, embeddings, &settings, seed)?;
    let k = fit.model.n_topics();
    if k < 2 {
        return Ok(topic_quality_loss(0.0, 0.0, k, weights.w_tc, weights.w_td));
    }
    let lists: Vec<Vec<String>> = fit
        .model
        .keyword_lists()
        .into_iter()
        .map(|t| t.into_iter().take(weights.top_k).collect())
        .collect();
    let tc = npmi_coherence(&lists, docs, weights.window)?;
    let td = topic_diversity(&lists, weights.top_k)?;
    Ok(topic_quality_loss(tc, td, k, weights.w_tc, weights.w_td))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d() -> SearchSpace {
        SearchSpace::new(
            BTreeMap::from([("x".to_string(), Domain::Uniform { lo: -5.0, hi: 5.0 })]),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn loss_rule() {
        assert!((topic_quality_loss(0.16, 0.93, 10, 1.0, 1.0) + 1.09).abs() < 1e-12);
        assert_eq!(topic_quality_loss(0.5, 0.9, 1, 1.0, 1.0), 1.0);
        assert_eq!(topic_quality_loss(0.5, 0.9, 0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn split_sizes_follow_gamma() {
        assert_eq!(split_sizes(1, 0.25), (1, 0));
        assert_eq!(split_sizes(10, 0.25), (3, 7));
        assert_eq!(split_sizes(4, 0.25), (1, 3));
        assert_eq!(split_sizes(0, 0.25), (0, 0));
    }

    #[test]
    fn startup_suggestions_are_seeded_prior_draws() {
        let space = one_d();
        let t = Trials::default();
        let a = tpe_suggest(&t, &space, &TpeParams::default(), 5).unwrap();
        let b = tpe_suggest(&t, &space, &TpeParams::default(), 5).unwrap();
        assert_eq!(a, b);
        let mut rng = trial_rng(5, 0);
        assert_eq!(a, space.sample_prior(&mut rng));
    }

    #[test]
    fn categorical_prefers_good_option() {
        let space = SearchSpace::new(
            BTreeMap::from([(
                "c".to_string(),
                Domain::Choice {
                    options: vec!["a".into(), "b".into()],
                },
            )]),
            vec![],
        )
        .unwrap();
        let mk = |i: usize, c: &str, loss: f64| Trial {
            index: i,
            params: BTreeMap::from([("c".to_string(), ParamValue::Choice(c.into()))]),
            loss: Some(loss),
            status: TrialStatus::Ok,
            duration_seconds: 0.0,
            error: None,
        };
        // 12 trials: the best three are "a", the rest "b"
        let mut trials = Trials::default();
        for i in 0..12 {
            trials.trials.push(if i < 3 { mk(i, "a", i as f64) } else { mk(i, "b", 10.0 + i as f64) });
        }
        // l(a)=4/5, g(a)=1/11, so a's ratio 8.8 beats b's 0.2 / (10/11)
        for seed in 0..20 {
            let p = tpe_suggest(&trials, &space, &TpeParams::default(), seed).unwrap();
            assert_eq!(p["c"], ParamValue::Choice("a".into()));
        }
    }

    #[test]
    fn integer_mass_sums_to_one() {
        let d = Domain::UniformInt { lo: 2, hi: 9 };
        let obs = [ParamValue::Int(3), ParamValue::Int(9)];
        let p = Parzen::fit(&d, &obs.iter().collect::<Vec<_>>());
        let total: f64 = (2..=9).map(|v| p.density(&ParamValue::Int(v))).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let empty = Parzen::fit(&d, &[]);
        assert!((empty.density(&ParamValue::Int(4)) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn invalid_spaces() {
        assert!(SearchSpace::new(BTreeMap::new(), vec![]).is_err());
        assert!(SearchSpace::new(
            BTreeMap::from([("x".to_string(), Domain::UniformInt { lo: 3, hi: 3 })]),
            vec![]
        )
        .is_err());
        assert!(SearchSpace::new(
            BTreeMap::from([("x".to_string(), Domain::Choice { options: vec![] })]),
            vec![]
        )
        .is_err());
        assert!(fmin(|_| Ok(0.0), &one_d(), &FminOptions::new(0, 1)).is_err());
    }

    #[test]
    fn all_failed_is_no_viable_configuration() {
        let r = fmin(|_| Err(Error::Domain("boom".into())), &one_d(), &FminOptions::new(3, 1));
        assert!(matches!(r, Err(Error::NoViableConfiguration(3))));
    }
}
