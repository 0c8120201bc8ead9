//! Topics from cluster labels: class-based TF-IDF, top words, MMR keyword
//! refinement and topic-count reduction.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenizedDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::manifold::ClusterLabels;
use crate::rank::{clip_top_n, top_terms, RankedTerms};

pub const OUTLIER: i64 = -1;

/// C x V class-based TF-IDF scores. Row 0 is the outlier class, row `t + 1`
/// topic `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtfidfMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Classes without any vocabulary token; their rows are zero.
    pub empty: Vec<i64>,
}

impl CtfidfMatrix {
    pub fn row(&self, topic: i64) -> &[f64] {
        &self.rows[(topic + 1) as usize]
    }

    pub fn n_topics(&self) -> usize {
        self.rows.len() - 1
    }
}

fn class_counts(labels: &[i64], n_topics: usize, docs: &[TokenizedDocument], vocab: &Vocabulary) -> Vec<Vec<f64>> {
    let mut tf = vec![vec![0.0; vocab.len()]; n_topics + 1];
    for (doc, &l) in docs.iter().zip(labels) {
        let row = &mut tf[(l + 1) as usize];
        for id in vocab.encode(&doc.tokens) {
            row[id] += 1.0;
        }
    }
    tf
}

fn check_labels(labels: &[i64], n_docs: usize) -> Result<usize> {
    if labels.len() != n_docs {
        return Err(Error::Validation(format!(
            "{} labels for {n_docs} documents",
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l < OUTLIER) {
        return Err(Error::Validation(format!("invalid topic label {l}")));
    }
    Ok(labels.iter().map(|&l| (l + 1) as usize).max().unwrap_or(0))
}

/// `W(t, c) = tf(t, c) * ln(1 + A / f_t)` where classes concatenate their
/// member documents, `f_t` is the term's total count over classes and `A` the
/// mean token count of the non-empty classes.
pub fn ctfidf(labels: &[i64], docs: &[TokenizedDocument], vocab: &Vocabulary) -> Result<CtfidfMatrix> {
    let n_topics = check_labels(labels, docs.len())?;
    let m = ctfidf_with(labels, n_topics, docs, vocab)?;
    for &c in m.empty.iter().filter(|&&c| c != OUTLIER) {
        log::warn!("topic {c} has no vocabulary tokens; its c-TF-IDF row is zero");
    }
    Ok(m)
}

pub(crate) fn ctfidf_with(
    labels: &[i64],
    n_topics: usize,
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
) -> Result<CtfidfMatrix> {
    let tf = class_counts(labels, n_topics, docs, vocab);
    let totals: Vec<f64> = tf.iter().map(|r| r.iter().sum()).collect();
    let non_empty: Vec<f64> = totals.iter().copied().filter(|&t| t > 0.0).collect();
    if non_empty.is_empty() {
        return Err(Error::Validation("no class contains a vocabulary token".into()));
    }
    let a = non_empty.iter().sum::<f64>() / non_empty.len() as f64;
    let mut f = vec![0.0; vocab.len()];
    for row in &tf {
        for (t, &c) in row.iter().enumerate() {
            f[t] += c;
        }
    }
    let idf: Vec<f64> = f
        .iter()
        .map(|&ft| if ft > 0.0 { (1.0 + a / ft).ln() } else { 0.0 })
        .collect();
    let rows = tf
        .iter()
        .map(|r| r.iter().zip(&idf).map(|(&c, &w)| c * w).collect())
        .collect();
    let empty: Vec<i64> = (0..=n_topics)
        .filter(|&c| totals[c] == 0.0)
        .map(|c| c as i64 - 1)
        .collect();
    Ok(CtfidfMatrix { rows, empty })
}

/// Top `n` terms of one score row, descending, ties lexicographic.
pub fn top_words(row: &[f64], vocab: &Vocabulary, n: usize) -> RankedTerms {
    top_terms(row, vocab, n)
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        d / (nu * nv)
    }
}

/// Greedy maximal marginal relevance over `(term, vector)` candidates.
/// Equal scores go to the lexicographically smaller term.
pub fn mmr_refine(centroid: &[f64], candidates: &[(String, Vec<f64>)], lambda: f64, n: usize) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Parameter(format!("MMR lambda must lie in [0, 1], got {lambda}")));
    }
    if !candidates.is_empty() && candidates.len() < n {
        log::warn!("only {} MMR candidates for {n} keywords", candidates.len());
    }
    let relevance: Vec<f64> = candidates.iter().map(|(_, v)| cos(v, centroid)).collect();
    let mut picked: Vec<usize> = Vec::new();
    let mut redundancy = vec![f64::NEG_INFINITY; candidates.len()];
    while picked.len() < n.min(candidates.len()) {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..candidates.len() {
            if picked.contains(&i) {
                continue;
            }
            let score = if picked.is_empty() {
                relevance[i]
            } else {
                lambda * relevance[i] - (1.0 - lambda) * redundancy[i]
            };
            let better = match best {
                None => true,
                Some((s, j)) => score > s || (score == s && candidates[i].0 < candidates[j].0),
            };
            if better {
                best = Some((score, i));
            }
        }
        let (_, i) = best.expect("unpicked candidate exists");
        picked.push(i);
        for j in 0..candidates.len() {
            redundancy[j] = redundancy[j].max(cos(&candidates[j].1, &candidates[i].1));
        }
    }
    Ok(picked.into_iter().map(|i| candidates[i].0.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicParams {
    pub top_n: usize,
    pub mmr_candidates: usize,
    pub mmr_lambda: f64,
    pub keywords: usize,
}

impl Default for TopicParams {
    fn default() -> Self {
        TopicParams {
            top_n: 10,
            mmr_candidates: 30,
            mmr_lambda: 0.5,
            keywords: 10,
        }
    }
}

/// Aligned inputs shared by topic construction and reduction: retained
/// documents, their vocabulary and one embedding row per document.
#[derive(Debug, Clone, Copy)]
pub struct TopicContext<'a> {
    pub docs: &'a [TokenizedDocument],
    pub vocab: &'a Vocabulary,
    pub embeddings: &'a [Vec<f64>],
}

impl TopicContext<'_> {
    fn check(&self) -> Result<()> {
        if self.docs.len() != self.embeddings.len() {
            return Err(Error::Validation(format!(
                "{} documents but {} embedding rows",
                self.docs.len(),
                self.embeddings.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: i64,
    pub size: usize,
    /// c-TF-IDF ranking.
    pub top_words: RankedTerms,
    /// MMR-refined keywords drawn from the top c-TF-IDF candidates.
    pub keywords: Vec<String>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub labels: ClusterLabels,
    pub ctfidf: CtfidfMatrix,
    /// The outlier topic first, then topics 0..K.
    pub topics: Vec<Topic>,
    pub params: TopicParams,
}

impl TopicModel {
    /// Non-outlier topic count.
    pub fn n_topics(&self) -> usize {
        self.topics.len() - 1
    }

    pub fn topic(&self, id: i64) -> &Topic {
        &self.topics[(id + 1) as usize]
    }

    /// Non-outlier topics in id order.
    pub fn non_outlier(&self) -> &[Topic] {
        &self.topics[1..]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.topics.iter().map(|t| t.size).collect()
    }

    /// Refined keywords of the non-outlier topics, the lists evaluation scores.
    pub fn keyword_lists(&self) -> Vec<Vec<String>> {
        self.non_outlier().iter().map(|t| t.keywords.clone()).collect()
    }

    pub fn write_sizes_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["topic_id", "size"]).map_err(|e| csv_err(path, e))?;
        for t in &self.topics {
            w.write_record([t.id.to_string(), t.size.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_words_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["topic_id", "rank", "term", "score"])
            .map_err(|e| csv_err(path, e))?;
        for t in &self.topics {
            for (r, (term, score)) in t.top_words.iter().enumerate() {
                w.write_record([t.id.to_string(), (r + 1).to_string(), term.clone(), format!("{score:.12}")])
                    .map_err(|e| csv_err(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path, trace: Option<&TopicMergeTrace>) -> Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            n_topics: usize,
            outliers: usize,
            topics: Vec<TopicSummary<'a>>,
            merges: &'a [Merge],
        }
        #[derive(Serialize)]
        struct TopicSummary<'a> {
            id: i64,
            size: usize,
            keywords: &'a [String],
            top_words: Vec<&'a str>,
        }
        let summary = Summary {
            n_topics: self.n_topics(),
            outliers: self.topics[0].size,
            topics: self
                .topics
                .iter()
                .map(|t| TopicSummary {
                    id: t.id,
                    size: t.size,
                    keywords: &t.keywords,
                    top_words: t.top_words.iter().map(|(w, _)| w.as_str()).collect(),
                })
                .collect(),
            merges: trace.map_or(&[], |t| t.merges.as_slice()),
        };
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut f, &summary)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        writeln!(f).map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Term vectors for MMR: mean embedding of the topic's documents that
/// contain the term.
fn term_vectors(
    members: &[usize],
    terms: &[(String, f64)],
    ctx: &TopicContext<'_>,
) -> Vec<(String, Vec<f64>)> {
    let dim = ctx.embeddings.first().map_or(0, Vec::len);
    let wanted: BTreeMap<&str, usize> = terms
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (t.as_str(), i))
        .collect();
    let mut sums = vec![vec![0.0; dim]; terms.len()];
    let mut counts = vec![0usize; terms.len()];
    for &d in members {
        let mut seen = vec![false; terms.len()];
        for tok in &ctx.docs[d].tokens {
            if let Some(&i) = wanted.get(tok.as_str()) {
                seen[i] = true;
            }
        }
        for (i, s) in seen.into_iter().enumerate() {
            if s {
                counts[i] += 1;
                for (acc, v) in sums[i].iter_mut().zip(&ctx.embeddings[d]) {
                    *acc += v;
                }
            }
        }
    }
    terms
        .iter()
        .zip(sums.into_iter().zip(counts))
        .map(|((t, _), (s, c))| {
            let v = if c == 0 { s } else { s.into_iter().map(|x| x / c as f64).collect() };
            (t.clone(), v)
        })
        .collect()
}

fn mean_rows(rows: &[usize], embeddings: &[Vec<f64>]) -> Vec<f64> {
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for &r in rows {
        for (o, v) in out.iter_mut().zip(&embeddings[r]) {
            *o += v;
        }
    }
    if !rows.is_empty() {
        out.iter_mut().for_each(|x| *x /= rows.len() as f64);
    }
    out
}

/// Composes c-TF-IDF, top words, centroids and MMR keywords. Labels must use
/// contiguous ids `0..K` plus `-1` for outliers.
pub fn build_topic_model(labels: ClusterLabels, ctx: &TopicContext<'_>, params: &TopicParams) -> Result<TopicModel> {
    ctx.check()?;
    let n_topics = check_labels(&labels.labels, ctx.docs.len())?;
    if labels.strengths.len() != labels.labels.len() {
        return Err(Error::Validation("labels and strengths differ in length".into()));
    }
    let matrix = ctfidf_with(&labels.labels, n_topics, ctx.docs, ctx.vocab)?;
    let top_n = clip_top_n(params.top_n, ctx.vocab.len());
    let candidates_n = params.mmr_candidates.min(ctx.vocab.len());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_topics + 1];
    for (d, &l) in labels.labels.iter().enumerate() {
        members[(l + 1) as usize].push(d);
    }
    let topics = (0..=n_topics)
        .into_par_iter()
        .map(|c| {
            let id = c as i64 - 1;
            let row = &matrix.rows[c];
            let centroid = mean_rows(&members[c], ctx.embeddings);
            let candidates = top_terms(row, ctx.vocab, candidates_n);
            let vectors = term_vectors(&members[c], &candidates, ctx);
            let keywords = mmr_refine(&centroid, &vectors, params.mmr_lambda, params.keywords)?;
            Ok(Topic {
                id,
                size: members[c].len(),
                top_words: top_terms(row, ctx.vocab, top_n),
                keywords,
                centroid,
            })
        })
        .collect::<Result<Vec<Topic>>>()?;
    for t in topics.iter().skip(1).filter(|t| t.size == 0) {
        log::warn!("topic {} has no documents", t.id);
    }
    Ok(TopicModel {
        labels,
        ctfidf: matrix,
        topics,
        params: params.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub source: i64,
    pub target: i64,
    pub cosine: f64,
}

/// Merges in order, in the topic ids of the model that was reduced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicMergeTrace {
    pub merges: Vec<Merge>,
}

fn merge_until(
    model: &TopicModel,
    ctx: &TopicContext<'_>,
    mut done: impl FnMut(&[usize], usize) -> bool,
) -> Result<(TopicModel, TopicMergeTrace)> {
    ctx.check()?;
    let k = model.n_topics();
    let mut labels = model.labels.labels.clone();
    let mut alive: Vec<bool> = vec![true; k];
    let mut sizes: Vec<usize> = model.non_outlier().iter().map(|t| t.size).collect();
    let mut matrix = model.ctfidf.clone();
    let mut trace = TopicMergeTrace::default();
    loop {
        let live: Vec<usize> = (0..k).filter(|&t| alive[t]).collect();
        if live.len() <= 1 || done(&sizes, live.len()) {
            break;
        }
        let source = *live
            .iter()
            .min_by(|&&a, &&b| sizes[a].cmp(&sizes[b]).then(a.cmp(&b)))
            .unwrap();
        let src_row = matrix.row(source as i64);
        let (target, cosine) = live
            .iter()
            .filter(|&&t| t != source)
            .map(|&t| (t, cos(src_row, matrix.row(t as i64))))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, cand| {
                if cand.1 > best.1 {
                    cand
                } else {
                    best
                }
            });
        for l in labels.iter_mut() {
            if *l == source as i64 {
                *l = target as i64;
            }
        }
        sizes[target] += sizes[source];
        sizes[source] = 0;
        alive[source] = false;
        trace.merges.push(Merge {
            source: source as i64,
            target: target as i64,
            cosine,
        });
        matrix = ctfidf_with(&labels, k, ctx.docs, ctx.vocab)?;
    }
    // renumber the surviving topics contiguously, keeping their order
    let mut new_id = vec![OUTLIER; k];
    let mut next = 0;
    for t in 0..k {
        if alive[t] {
            new_id[t] = next;
            next += 1;
        }
    }
    let relabeled = labels
        .iter()
        .map(|&l| if l == OUTLIER { OUTLIER } else { new_id[l as usize] })
        .collect();
    let reduced = build_topic_model(
        ClusterLabels {
            labels: relabeled,
            strengths: model.labels.strengths.clone(),
        },
        ctx,
        &model.params,
    )?;
    Ok((reduced, trace))
}

/// Repeatedly merges the smallest topic into its most c-TF-IDF-similar
/// neighbor until `target_k` non-outlier topics remain. A target at or above
/// the current count returns the model unchanged.
pub fn reduce_topics(model: &TopicModel, target_k: usize, ctx: &TopicContext<'_>) -> Result<(TopicModel, TopicMergeTrace)> {
    if target_k < 1 {
        return Err(Error::Parameter("target topic count must be >= 1".into()));
    }
    if target_k >= model.n_topics() {
        if target_k > model.n_topics() {
            log::warn!(
                "requested {target_k} topics but only {} exist; leaving the model unchanged",
                model.n_topics()
            );
        }
        return Ok((model.clone(), TopicMergeTrace::default()));
    }
    merge_until(model, ctx, |_, live| live <= target_k)
}

/// Merges topics smaller than `min_size` into their nearest neighbor.
pub fn merge_small_topics(model: &TopicModel, min_size: usize, ctx: &TopicContext<'_>) -> Result<(TopicModel, TopicMergeTrace)> {
    if model.non_outlier().iter().all(|t| t.size >= min_size) {
        return Ok((model.clone(), TopicMergeTrace::default()));
    }
    merge_until(model, ctx, |sizes, _| {
        sizes.iter().filter(|&&s| s > 0).all(|&s| s >= min_size)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(uid: &str, words: &str) -> TokenizedDocument {
        TokenizedDocument::new(uid, 2000, words.split_whitespace().map(String::from).collect())
    }

    #[test]
    fn disjoint_classes_score_zero_abroad() {
        let docs = vec![doc("a", "x x y"), doc("b", "z w")];
        let vocab = Vocabulary::from_terms(["w", "x", "y", "z"], &docs);
        let m = ctfidf(&[0, 1], &docs, &vocab).unwrap();
        assert_eq!(m.row(0)[vocab.id("z").unwrap()], 0.0);
        assert_eq!(m.row(1)[vocab.id("x").unwrap()], 0.0);
        assert_eq!(m.row(OUTLIER), &[0.0; 4]);
        assert_eq!(m.empty, vec![OUTLIER]);
    }

    #[test]
    fn single_class_formula_collapse() {
        let docs = vec![doc("a", "x x y"), doc("b", "x z")];
        let vocab = Vocabulary::from_terms(["x", "y", "z"], &docs);
        let m = ctfidf(&[0, 0], &docs, &vocab).unwrap();
        let a = 5.0;
        assert!((m.row(0)[0] - 3.0 * (1.0 + a / 3.0f64).ln()).abs() < 1e-12);
        assert!((m.row(0)[1] - (1.0 + a).ln()).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_rank_lexicographically() {
        let docs = vec![doc("a", "b a c")];
        let vocab = Vocabulary::from_terms(["a", "b", "c"], &docs);
        let words = top_words(&[1.0, 1.0, 1.0], &vocab, 3);
        let names: Vec<&str> = words.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(top_words(&[0.0, 2.0, 0.0], &vocab, 3), vec![("b".to_string(), 2.0)]);
    }

    #[test]
    fn mmr_lambda_one_is_similarity_ranking() {
        let c = vec![1.0, 0.0];
        let cands = vec![
            ("far".to_string(), vec![0.0, 1.0]),
            ("near".to_string(), vec![1.0, 0.1]),
            ("mid".to_string(), vec![1.0, 1.0]),
        ];
        assert_eq!(mmr_refine(&c, &cands, 1.0, 3).unwrap(), ["near", "mid", "far"]);
        assert!(mmr_refine(&c, &cands, 1.5, 3).is_err());
    }

    #[test]
    fn mmr_skips_duplicates() {
        let c = vec![1.0, 0.2];
        let cands = vec![
            ("alpha".to_string(), vec![1.0, 0.1]),
            ("beta".to_string(), vec![1.0, 0.1]),
            ("gamma".to_string(), vec![0.3, 1.0]),
        ];
        assert_eq!(mmr_refine(&c, &cands, 0.5, 2).unwrap(), ["alpha", "gamma"]);
        assert_eq!(mmr_refine(&c, &cands, 0.5, 5).unwrap().len(), 3);
    }
}
