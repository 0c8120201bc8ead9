//! Topic coherence (NPMI), topic diversity, topic-size balance and the
//! model comparison table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDocument;
use crate::error::{Error, Result};
use crate::topics::{TopicModel, OUTLIER};

pub const DEFAULT_WINDOW: usize = 10;

/// Boolean sliding-window occurrence counts for a fixed set of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCounts {
    pub windows: u64,
    terms: BTreeMap<String, usize>,
    single: Vec<u64>,
    joint: HashMap<(usize, usize), u64>,
}

impl WindowCounts {
    /// Documents shorter than the window form one window; longer ones
    /// contribute `len - window + 1` windows.
    pub fn count<'a>(terms: impl IntoIterator<Item = &'a str>, docs: &[TokenizedDocument], window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Parameter("window must be >= 1".into()));
        }
        let terms: BTreeMap<String, usize> = terms
            .into_iter()
            .collect::<BTreeSet<&str>>()
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();
        let n_terms = terms.len();
        type Acc = (u64, Vec<u64>, HashMap<(usize, usize), u64>);
        let (windows, single, joint) = docs
            .par_iter()
            .fold(
                || (0u64, vec![0u64; n_terms], HashMap::new()),
                |mut acc: Acc, doc| {
                    let ids: Vec<Option<usize>> = doc.tokens.iter().map(|t| terms.get(t.as_str()).copied()).collect();
                    let n_win = if ids.len() <= window { 1 } else { ids.len() - window + 1 };
                    let mut in_window = vec![0u32; n_terms];
                    let mut present: BTreeSet<usize> = BTreeSet::new();
                    let first = window.min(ids.len());
                    for id in ids[..first].iter().flatten() {
                        in_window[*id] += 1;
                        present.insert(*id);
                    }
                    for w in 0..n_win {
                        if w > 0 {
                            if let Some(id) = ids[w - 1] {
                                in_window[id] -= 1;
                                if in_window[id] == 0 {
                                    present.remove(&id);
                                }
                            }
                            if let Some(id) = ids[w + window - 1] {
                                in_window[id] += 1;
                                present.insert(id);
                            }
                        }
                        acc.0 += 1;
                        let p: Vec<usize> = present.iter().copied().collect();
                        for (x, &i) in p.iter().enumerate() {
                            acc.1[i] += 1;
                            for &j in &p[x + 1..] {
                                *acc.2.entry((i, j)).or_insert(0) += 1;
                            }
                        }
                    }
                    acc
                },
            )
            .reduce(
                || (0u64, vec![0u64; n_terms], HashMap::new()),
                |mut a, b| {
                    a.0 += b.0;
                    for (x, y) in a.1.iter_mut().zip(b.1) {
                        *x += y;
                    }
                    for (k, v) in b.2 {
                        *a.2.entry(k).or_insert(0) += v;
                    }
                    a
                },
            );
        Ok(WindowCounts {
            windows,
            terms,
            single,
            joint,
        })
    }

    pub fn occurrences(&self, term: &str) -> u64 {
        self.terms.get(term).map_or(0, |&i| self.single[i])
    }

    pub fn co_occurrences(&self, a: &str, b: &str) -> u64 {
        match (self.terms.get(a), self.terms.get(b)) {
            (Some(&i), Some(&j)) if i != j => *self.joint.get(&(i.min(j), i.max(j))).unwrap_or(&0),
            (Some(&i), Some(_)) => self.single[i],
            _ => 0,
        }
    }

    /// NPMI of a pair, `None` when either term never occurs.
    pub fn npmi(&self, a: &str, b: &str) -> Option<f64> {
        let (ca, cb) = (self.occurrences(a), self.occurrences(b));
        if ca == 0 || cb == 0 {
            return None;
        }
        let joint = self.co_occurrences(a, b);
        if joint == 0 {
            return Some(-1.0);
        }
        let n = self.windows as f64;
        let (pa, pb, pab) = (ca as f64 / n, cb as f64 / n, joint as f64 / n);
        if pab >= 1.0 {
            return Some(1.0);
        }
        Some(((pab / (pa * pb)).ln() / -pab.ln()).clamp(-1.0, 1.0))
    }
}

/// Mean pairwise NPMI per topic; `None` for topics whose pairs were all
/// skipped.
pub fn npmi_topic_scores(topics: &[Vec<String>], counts: &WindowCounts) -> Vec<Option<f64>> {
    let mut skipped = BTreeSet::new();
    let scores = topics
        .iter()
        .map(|words| {
            let mut sum = 0.0;
            let mut used = 0usize;
            for (x, a) in words.iter().enumerate() {
                for b in &words[x + 1..] {
                    match counts.npmi(a, b) {
                        Some(v) => {
                            sum += v;
                            used += 1;
                        }
                        None => {
                            for t in [a, b] {
                                if counts.occurrences(t) == 0 {
                                    skipped.insert(t.clone());
                                }
                            }
                        }
                    }
                }
            }
            (used > 0).then(|| sum / used as f64)
        })
        .collect();
    if !skipped.is_empty() {
        log::warn!(
            "{} topic term(s) never occur in the reference corpus; their pairs were skipped: {:?}",
            skipped.len(),
            skipped.iter().take(10).collect::<Vec<_>>()
        );
    }
    scores
}

/// Model-level coherence: mean over topics of their mean pairwise NPMI.
pub fn npmi_coherence(topics: &[Vec<String>], docs: &[TokenizedDocument], window: usize) -> Result<f64> {
    if !topics.iter().any(|t| t.len() >= 2) {
        return Err(Error::UndefinedScore("coherence needs a topic with at least two terms".into()));
    }
    let counts = WindowCounts::count(topics.iter().flatten().map(String::as_str), docs, window)?;
    coherence_from_counts(topics, &counts)
}

pub fn coherence_from_counts(topics: &[Vec<String>], counts: &WindowCounts) -> Result<f64> {
    let scores: Vec<f64> = npmi_topic_scores(topics, counts).into_iter().flatten().collect();
    if scores.is_empty() {
        return Err(Error::UndefinedScore("every term pair was skipped".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Unique terms over all slots of the first `k` terms of each list.
pub fn topic_diversity(topics: &[Vec<String>], k: usize) -> Result<f64> {
    if topics.is_empty() || k == 0 {
        return Err(Error::UndefinedScore("diversity needs at least one topic and k >= 1".into()));
    }
    if topics.iter().any(|t| t.len() < k) {
        log::warn!("some topic lists have fewer than {k} terms; missing slots count as repeats");
    }
    let unique: BTreeSet<&str> = topics
        .iter()
        .flat_map(|t| t.iter().take(k).map(String::as_str))
        .collect();
    Ok(unique.len() as f64 / (topics.len() * k) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    /// Document counts of the non-outlier topics.
    pub sizes: Vec<usize>,
    pub outliers: usize,
    pub outlier_share: f64,
}

impl SizeDistribution {
    pub fn from_labels(labels: &[i64], n_topics: usize) -> Self {
        let mut sizes = vec![0; n_topics];
        let mut outliers = 0;
        for &l in labels {
            if l == OUTLIER {
                outliers += 1;
            } else {
                sizes[l as usize] += 1;
            }
        }
        let share = if labels.is_empty() {
            0.0
        } else {
            outliers as f64 / labels.len() as f64
        };
        SizeDistribution {
            sizes,
            outliers,
            outlier_share: share,
        }
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum::<usize>() + self.outliers
    }
}

pub fn size_distribution(model: &TopicModel) -> SizeDistribution {
    SizeDistribution::from_labels(&model.labels.labels, model.n_topics())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Corpus slice the model was fitted and scored on, e.g. `1955-1970`.
    pub subset: String,
    /// Requested topic count.
    pub n_topics: usize,
    /// Topics actually scored (fewer when a model could not reach the request).
    pub scored_topics: usize,
    pub tc: f64,
    pub td: f64,
    pub fit_seconds: f64,
    pub sizes: SizeDistribution,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.tc) {
            return Err(Error::Validation(format!("TC {} outside [-1, 1]", self.tc)));
        }
        if !(self.td > 0.0 && self.td <= 1.0) {
            return Err(Error::Validation(format!("TD {} outside (0, 1]", self.td)));
        }
        if !(self.fit_seconds >= 0.0) {
            return Err(Error::Validation(format!("negative fit time {}", self.fit_seconds)));
        }
        Ok(())
    }
}

/// Scores one model's keyword lists against its reference documents.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_topics(
    model: &str,
    subset: &str,
    n_topics: usize,
    topics: &[Vec<String>],
    docs: &[TokenizedDocument],
    window: usize,
    top_k: usize,
    fit_seconds: f64,
    sizes: SizeDistribution,
) -> Result<EvalReport> {
    let lists: Vec<Vec<String>> = topics.iter().map(|t| t.iter().take(top_k).cloned().collect()).collect();
    let report = EvalReport {
        model: model.to_string(),
        subset: subset.to_string(),
        n_topics,
        scored_topics: lists.len(),
        tc: npmi_coherence(&lists, docs, window)?,
        td: topic_diversity(&lists, top_k)?,
        fit_seconds,
        sizes,
    };
    report.validate()?;
    Ok(report)
}

/// `TC, TD` rendered to two decimals, the layout of a table cell.
pub fn format_cell(tc: f64, td: f64) -> String {
    format!("{}, {}", two(tc), two(td))
}

fn two(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub report: EvalReport,
    pub best_tc: bool,
    pub best_td: bool,
}

/// Reports grouped by model and topic count, one column group per subset,
/// with the best TC and TD of every (subset, #T) flagged (ties all flagged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub models: Vec<String>,
    pub subsets: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(reports: &[EvalReport]) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(Error::Validation("nothing to compare".into()));
    }
    let mut models: Vec<String> = Vec::new();
    let mut subsets: Vec<String> = Vec::new();
    for r in reports {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
        if !subsets.contains(&r.subset) {
            subsets.push(r.subset.clone());
        }
    }
    let key = |r: &EvalReport| (r.subset.clone(), r.n_topics);
    let mut best: BTreeMap<(String, usize), (f64, f64)> = BTreeMap::new();
    for r in reports {
        let e = best.entry(key(r)).or_insert((f64::NEG_INFINITY, f64::NEG_INFINITY));
        // compare at the displayed precision so visibly equal cells tie
        e.0 = e.0.max(round2(r.tc));
        e.1 = e.1.max(round2(r.td));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| {
            let (tc, td) = best[&key(r)];
            ComparisonRow {
                report: r.clone(),
                best_tc: round2(r.tc) == tc,
                best_td: round2(r.td) == td,
            }
        })
        .collect();
    let pos = |v: &[String], s: &str| v.iter().position(|x| x == s).unwrap();
    rows.sort_by(|a, b| {
        pos(&models, &a.report.model)
            .cmp(&pos(&models, &b.report.model))
            .then(a.report.n_topics.cmp(&b.report.n_topics))
            .then(pos(&subsets, &a.report.subset).cmp(&pos(&subsets, &b.report.subset)))
    });
    Ok(ComparisonTable {
        models,
        subsets,
        rows,
    })
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl ComparisonTable {
    fn cell(&self, model: &str, k: usize, subset: &str) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.report.model == model && r.report.n_topics == k && r.report.subset == subset)
    }

    fn counts_for(&self, model: &str) -> Vec<usize> {
        let mut ks: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.report.model == model)
            .map(|r| r.report.n_topics)
            .collect();
        ks.dedup();
        ks
    }

    /// Long format: `model,n_topics,subset,tc,td,time,best_tc,best_td`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,n_topics,subset,tc,td,time,best_tc,best_td\n");
        for r in &self.rows {
            let p = &r.report;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.2},{},{}",
                p.model,
                p.n_topics,
                p.subset,
                two(p.tc),
                two(p.td),
                p.fit_seconds,
                r.best_tc,
                r.best_td
            );
        }
        out
    }

    /// Wide layout: `Model | #T | (TC TD Time) per subset`, best values bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | #T |");
        for s in &self.subsets {
            let _ = write!(out, " {s} TC | {s} TD | {s} Time |");
        }
        out.push_str("\n|---|---|");
        for _ in &self.subsets {
            out.push_str("---|---|---|");
        }
        out.push('\n');
        for m in &self.models {
            for k in self.counts_for(m) {
                let _ = write!(out, "| {m} | {k} |");
                for s in &self.subsets {
                    match self.cell(m, k, s) {
                        Some(r) => {
                            let bold = |v: String, b: bool| if b { format!("**{v}**") } else { v };
                            let _ = write!(
                                out,
                                " {} | {} | {:.2} |",
                                bold(two(r.report.tc), r.best_tc),
                                bold(two(r.report.td), r.best_td),
                                r.report.fit_seconds
                            );
                        }
                        None => out.push_str(" - | - | - |"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, csv_path: &Path, md_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        std::fs::write(md_path, self.to_markdown()).map_err(|e| Error::io(md_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &str) -> TokenizedDocument {
        TokenizedDocument::new("d", 2000, words.split_whitespace().map(String::from).collect())
    }

    fn s(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn always_together_is_one_never_is_minus_one() {
        let docs = vec![doc("a b x"), doc("c d"), doc("a b"), doc("y z")];
        let c = WindowCounts::count(["a", "b", "c"], &docs, 10).unwrap();
        assert_eq!(c.windows, 4);
        assert!((c.npmi("a", "b").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.npmi("a", "c"), Some(-1.0));
        assert_eq!(c.npmi("a", "q"), None);
        assert_eq!(c.npmi("a", "b"), c.npmi("b", "a"));
    }

    #[test]
    fn diversity_boundaries() {
        let a = s(&["a", "b", "c", "d"]);
        let b = s(&["e", "f", "g", "h"]);
        assert_eq!(topic_diversity(&[a.clone(), b], 4).unwrap(), 1.0);
        assert_eq!(topic_diversity(&[a.clone(), a.clone(), a.clone()], 4).unwrap(), 1.0 / 3.0);
        let half = s(&["a", "b", "x", "y"]);
        assert_eq!(topic_diversity(&[a, half], 4).unwrap(), 6.0 / 8.0);
        assert!(topic_diversity(&[], 4).is_err());
    }

    #[test]
    fn size_distribution_edges() {
        let d = SizeDistribution::from_labels(&[0, 0, 0], 1);
        assert_eq!((d.sizes.clone(), d.outlier_share), (vec![3], 0.0));
        let d = SizeDistribution::from_labels(&[-1, -1], 0);
        assert!(d.sizes.is_empty());
        assert_eq!(d.outlier_share, 1.0);
        assert_eq!(d.total(), 2);
    }

    #[test]
    fn cell_format_and_ties() {
        assert_eq!(format_cell(0.10, 0.78), "0.10, 0.78");
        assert_eq!(format_cell(-0.001, 1.0), "0.00, 1.00");
        let rep = |m: &str, tc: f64| EvalReport {
            model: m.into(),
            subset: "all".into(),
            n_topics: 10,
            scored_topics: 10,
            tc,
            td: 0.5,
            fit_seconds: 1.0,
            sizes: SizeDistribution::from_labels(&[], 0),
        };
        let t = compare(&[rep("lda", 0.1), rep("nmf", 0.1), rep("cluster", 0.05)]).unwrap();
        let flags: Vec<bool> = t.rows.iter().map(|r| r.best_tc).collect();
        assert_eq!(flags, vec![true, true, false]);
        assert!(t.to_markdown().contains("| lda | 10 | **0.10** | **0.50** | 1.00 |"));
        assert!(t.to_csv().starts_with("model,n_topics,subset,tc,td,time,best_tc,best_td\nlda,10,all,0.10,0.50,1.00,true,true"));
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn undefined_when_nothing_scores() {
        let docs = vec![doc("a b")];
        assert!(matches!(
            npmi_coherence(&[s(&["x", "y"])], &docs, 10),
            Err(Error::UndefinedScore(_))
        ));
        assert!(npmi_coherence(&[s(&["x"])], &docs, 10).is_err());
    }
}
