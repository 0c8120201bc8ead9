//! Oracles and generators shared by the integration tests. Everything here is
//! written independently of the library internals it checks.
#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use chronotopic::classical::{InputMode, WeightedDocTermMatrix};
use chronotopic::fixture::FixtureManifest;
use chronotopic::pipeline::PipelineConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best mean cosine over all one-to-one matchings (exhaustive, small K).
pub fn matched_mean_cosine(learned: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    assert_eq!(learned.len(), truth.len());
    permutations(truth.len())
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| cosine(&learned[i], &truth[j]))
                .sum::<f64>()
                / truth.len() as f64
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, k: usize) -> Vec<f64> {
    let g = rand_distr::Gamma::new(alpha, 1.0).unwrap();
    let mut v: Vec<f64> = (0..k).map(|_| g.sample(rng).max(1e-300)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Corpus drawn from the LDA generative process. Returns the count matrix
/// and the true topic-word distributions.
pub fn lda_corpus(
    seed: u64,
    k: usize,
    v: usize,
    n: usize,
    doc_len: usize,
) -> (WeightedDocTermMatrix, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let topics: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut r, 0.1, v)).collect();
    let rows = (0..n)
        .map(|_| {
            let theta = dirichlet(&mut r, 0.2, k);
            let mut counts = vec![0.0; v];
            for _ in 0..doc_len {
                let z = categorical(&mut r, &theta);
                counts[categorical(&mut r, &topics[z])] += 1.0;
            }
            counts
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0.0)
                .collect()
        })
        .collect();
    (WeightedDocTermMatrix::new(rows, v, InputMode::Bow).unwrap(), topics)
}

/// Random sparse non-negative matrix with roughly `density` filled cells.
pub fn sparse_matrix(seed: u64, n: usize, v: usize, density: f64) -> WeightedDocTermMatrix {
    let mut r = rng(seed);
    let rows = (0..n)
        .map(|_| {
            (0..v)
                .filter_map(|j| {
                    if r.random::<f64>() < density {
                        Some((j, r.random::<f64>() * 5.0))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    WeightedDocTermMatrix::new(rows, v, InputMode::Bow).unwrap()
}

/// Isotropic Gaussian blobs with generating labels.
pub fn blobs(seed: u64, centers: &[Vec<f64>], per: usize, sd: f64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(center.iter().map(|&x| x + noise.sample(&mut r)).collect());
            labels.push(c as i64);
        }
    }
    (pts, labels)
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Adjusted Rand index from the contingency table.
pub fn adjusted_rand(a: &[i64], b: &[i64]) -> f64 {
    use std::collections::HashMap;
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    let mut ra: HashMap<i64, u64> = HashMap::new();
    let mut rb: HashMap<i64, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let expected = sa * sb / c2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Fraction of points whose cluster's majority label equals their own label;
/// noise points count as impure.
pub fn purity(pred: &[i64], truth: &[i64]) -> f64 {
    use std::collections::HashMap;
    let mut by_cluster: HashMap<i64, HashMap<i64, usize>> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= 0 {
            *by_cluster.entry(p).or_default().entry(t).or_default() += 1;
        }
    }
    let correct: usize = by_cluster
        .values()
        .map(|m| m.values().copied().max().unwrap_or(0))
        .sum();
    correct as f64 / pred.len() as f64
}

/// Kruskal MST total weight over a complete graph given by `dist`.
pub fn kruskal_weight(n: usize, dist: impl Fn(usize, usize) -> f64) -> f64 {
    kruskal_edges(n, dist).iter().sum()
}

/// Kruskal MST edge weights in the order they were accepted (ascending).
pub fn kruskal_edges(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((dist(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut taken = Vec::with_capacity(n.saturating_sub(1));
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            taken.push(w);
            if taken.len() + 1 == n {
                break;
            }
        }
    }
    taken
}

/// c-TF-IDF by direct summation over raw token lists. Row 0 is the outlier
/// class; `terms` is the vocabulary in id order.
pub fn ctfidf_oracle(labels: &[i64], docs: &[Vec<String>], terms: &[String]) -> Vec<Vec<f64>> {
    let classes = labels.iter().copied().max().unwrap_or(-1) + 2;
    let tf = |c: i64, t: &str| -> f64 {
        docs.iter()
            .zip(labels)
            .filter(|(_, &l)| l + 1 == c)
            .map(|(d, _)| d.iter().filter(|w| w.as_str() == t).count() as f64)
            .sum()
    };
    let mut class_total = Vec::new();
    for c in 0..classes {
        class_total.push(terms.iter().map(|t| tf(c, t)).sum::<f64>());
    }
    let nonempty: Vec<f64> = class_total.iter().copied().filter(|&x| x > 0.0).collect();
    let a = nonempty.iter().sum::<f64>() / nonempty.len() as f64;
    (0..classes)
        .map(|c| {
            terms
                .iter()
                .map(|t| {
                    let f: f64 = (0..classes).map(|k| tf(k, t)).sum();
                    if f == 0.0 {
                        0.0
                    } else {
                        tf(c, t) * (1.0 + a / f).ln()
                    }
                })
                .collect()
        })
        .collect()
}

/// Random labelled token lists: up to `max_docs` documents over `v` terms and
/// up to `max_classes` classes (label -1 included).
pub fn random_labelled_docs(
    seed: u64,
    max_docs: usize,
    v: usize,
    max_classes: i64,
) -> (Vec<i64>, Vec<Vec<String>>, Vec<String>) {
    let mut r = rng(seed);
    let terms: Vec<String> = (0..v).map(|j| format!("w{j:02}")).collect();
    let n = r.random_range(1..=max_docs);
    let classes = r.random_range(1..=max_classes);
    let mut labels: Vec<i64> = (0..n).map(|_| r.random_range(-1..classes)).collect();
    labels[0] = 0;
    let docs = (0..n)
        .map(|_| {
            let len = r.random_range(1..12);
            (0..len).map(|_| terms[r.random_range(0..v)].clone()).collect()
        })
        .collect();
    (labels, docs, terms)
}

/// Best `(x-2)^2` found by `evals` uniform draws on [-5, 5].
pub fn random_search_best(seed: u64, evals: usize) -> f64 {
    let mut r = rng(seed ^ 0x5eed);
    (0..evals)
        .map(|_| {
            let x: f64 = r.random_range(-5.0..5.0);
            (x - 2.0) * (x - 2.0)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Explicit window enumeration and pairwise NPMI averaging.
pub fn window_oracle(topics: &[Vec<&str>], docs: &[Vec<&str>], w: usize) -> f64 {
    let mut windows: Vec<HashSet<&str>> = Vec::new();
    for d in docs {
        if d.len() <= w {
            windows.push(d.iter().copied().collect());
        } else {
            for s in 0..=d.len() - w {
                windows.push(d[s..s + w].iter().copied().collect());
            }
        }
    }
    let n = windows.len() as f64;
    let p = |t: &[&str]| windows.iter().filter(|win| t.iter().all(|x| win.contains(x))).count() as f64 / n;
    let mut topic_scores = Vec::new();
    for topic in topics {
        let mut vals = Vec::new();
        for i in 0..topic.len() {
            for j in i + 1..topic.len() {
                let (a, b) = (topic[i], topic[j]);
                if p(&[a]) == 0.0 || p(&[b]) == 0.0 {
                    continue;
                }
                let pab = p(&[a, b]);
                vals.push(if pab == 0.0 {
                    -1.0
                } else if pab == 1.0 {
                    1.0
                } else {
                    (pab / (p(&[a]) * p(&[b]))).ln() / -pab.ln()
                });
            }
        }
        if !vals.is_empty() {
            topic_scores.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    topic_scores.iter().sum::<f64>() / topic_scores.len() as f64
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini_corpus")
}

/// The bundled mini-corpus config writing into `out`.
pub fn fixture_config(out: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixture_dir().join("config.toml")).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

pub fn fixture_manifest() -> FixtureManifest {
    let text = std::fs::read_to_string(fixture_dir().join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}
