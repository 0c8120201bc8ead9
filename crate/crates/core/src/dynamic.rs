//! Topics over time: per-bin frequencies and bin-local representations of the
//! static model's topics.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{TimeBins, TokenizedDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::rank::{top_terms, RankedTerms};
use crate::topics::{ctfidf_with, TopicModel, OUTLIER};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicParams {
    /// Average each bin-local row with the topic's global row.
    pub global_tuning: bool,
    /// Average each bin-local row with the same topic's row in the previous bin.
    pub evolution_tuning: bool,
    /// Report frequency as the share of the bin's documents instead of a count.
    pub proportion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub topic_id: i64,
    pub bin_index: usize,
    pub count: usize,
    pub frequency: f64,
    pub top_words: RankedTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsOverTime {
    pub bins: TimeBins,
    /// Sorted by `(topic_id, bin_index)`; non-outlier topics only.
    pub rows: Vec<TimeRow>,
}

impl TopicsOverTime {
    pub fn row(&self, topic: i64, bin: usize) -> &TimeRow {
        &self.rows[topic as usize * self.bins.len() + bin]
    }

    /// Bin with the highest count for `topic`, earliest on ties.
    pub fn peak_bin(&self, topic: i64) -> usize {
        (0..self.bins.len())
            .max_by(|&a, &b| {
                self.row(topic, a)
                    .count
                    .cmp(&self.row(topic, b).count)
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }

    /// `topic_id,bin_start,bin_end,frequency,top_words` with space-joined words.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["topic_id", "bin_start", "bin_end", "frequency", "top_words"])
            .map_err(err)?;
        for r in &self.rows {
            let [s, e] = self.bins.bounds()[r.bin_index];
            let freq = if r.frequency.fract() == 0.0 {
                format!("{}", r.frequency as u64)
            } else {
                format!("{:.6}", r.frequency)
            };
            let words: Vec<&str> = r.top_words.iter().map(|(t, _)| t.as_str()).collect();
            w.write_record([r.topic_id.to_string(), s.to_string(), e.to_string(), freq, words.join(" ")])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect()
}

/// Re-represents every topic within every bin. Topic labels come from the
/// static model; `docs` must be the documents the model was built on.
pub fn topics_over_time(
    model: &TopicModel,
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    bins: &TimeBins,
    params: &DynamicParams,
) -> Result<TopicsOverTime> {
    let labels = &model.labels.labels;
    if labels.len() != docs.len() {
        return Err(Error::Validation(format!(
            "model has {} labels for {} documents",
            labels.len(),
            docs.len()
        )));
    }
    let doc_bins: Vec<usize> = docs
        .iter()
        .map(|d| bins.bin_of(d.year).ok_or(Error::UncoveredYear(d.year)))
        .collect::<Result<_>>()?;
    let k = model.n_topics();
    let top_n = model.params.top_n.min(vocab.len());

    // bin-local c-TF-IDF rows, one per non-outlier topic
    let local: Vec<Option<Vec<Vec<f64>>>> = (0..bins.len())
        .into_par_iter()
        .map(|b| {
            let members: Vec<usize> = (0..docs.len()).filter(|&d| doc_bins[d] == b).collect();
            if members.is_empty() {
                return Ok(None);
            }
            let sub_docs: Vec<TokenizedDocument> = members.iter().map(|&d| docs[d].clone()).collect();
            let sub_labels: Vec<i64> = members.iter().map(|&d| labels[d]).collect();
            match ctfidf_with(&sub_labels, k, &sub_docs, vocab) {
                Ok(m) => Ok(Some(m.rows[1..].to_vec())),
                Err(Error::Validation(_)) => Ok(Some(vec![vec![0.0; vocab.len()]; k])),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![vec![0usize; bins.len()]; k];
    let mut bin_totals = vec![0usize; bins.len()];
    for (d, &l) in labels.iter().enumerate() {
        bin_totals[doc_bins[d]] += 1;
        if l != OUTLIER {
            counts[l as usize][doc_bins[d]] += 1;
        }
    }

    let mut rows = Vec::with_capacity(k * bins.len());
    for t in 0..k {
        let mut previous: Option<Vec<f64>> = None;
        for b in 0..bins.len() {
            let count = counts[t][b];
            let frequency = if params.proportion {
                if bin_totals[b] == 0 {
                    0.0
                } else {
                    count as f64 / bin_totals[b] as f64
                }
            } else {
                count as f64
            };
            let mut top_words = Vec::new();
            if count > 0 {
                let mut row = local[b].as_ref().expect("bin with members")[t].clone();
                if params.evolution_tuning {
                    if let Some(prev) = &previous {
                        row = average(&row, prev);
                    }
                }
                previous = Some(row.clone());
                if params.global_tuning {
                    row = average(&row, model.ctfidf.row(t as i64));
                }
                top_words = top_terms(&row, vocab, top_n);
            }
            rows.push(TimeRow {
                topic_id: t as i64,
                bin_index: b,
                count,
                frequency,
                top_words,
            });
        }
    }
    Ok(TopicsOverTime {
        bins: bins.clone(),
        rows,
    })
}
