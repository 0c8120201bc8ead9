//! Classical baselines: LDA (batch variational Bayes) and NMF
//! (multiplicative updates), each fed a bag-of-words, TF-IDF or
//! entity-token document-term matrix.

mod lda;
mod nmf;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenizedDocument, Vocabulary};
use crate::error::{Error, Result};

pub use lda::{fit_lda, lda_topic_words, LdaModel, LdaParams};
pub use nmf::{fit_nmf, nmf_topic_words, NmfModel, NmfParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    Bow,
    Tfidf,
    Entity,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputMode::Bow => "bow",
            InputMode::Tfidf => "tfidf",
            InputMode::Entity => "entity",
        })
    }
}

/// Sparse non-negative document-term weights, one row per retained
/// document, entries sorted by term id.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDocTermMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    n_terms: usize,
    mode: InputMode,
}

impl WeightedDocTermMatrix {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, n_terms: usize, mode: InputMode) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for &(t, w) in row {
                if t >= n_terms {
                    return Err(Error::Validation(format!(
                        "row {i} references term {t} outside vocabulary of {n_terms}"
                    )));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Validation(format!(
                        "row {i} has invalid weight {w} for term {t}"
                    )));
                }
            }
        }
        let rows = rows
            .into_iter()
            .map(|r| {
                let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                for (t, w) in r {
                    *merged.entry(t).or_insert(0.0) += w;
                }
                merged.into_iter().filter(|&(_, w)| w > 0.0).collect()
            })
            .collect();
        Ok(WeightedDocTermMatrix {
            rows,
            n_terms,
            mode,
        })
    }

    /// Term counts of the retained documents. `mode` is `Bow` for ordinary
    /// tokens and `Entity` for entity-token documents.
    pub fn from_documents(
        docs: &[TokenizedDocument],
        vocab: &Vocabulary,
        mode: InputMode,
    ) -> Self {
        let rows = docs
            .iter()
            .filter(|d| d.retained)
            .map(|d| {
                let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
                for id in vocab.encode(&d.tokens) {
                    *counts.entry(id).or_insert(0.0) += 1.0;
                }
                counts.into_iter().collect()
            })
            .collect();
        WeightedDocTermMatrix {
            rows,
            n_terms: vocab.len(),
            mode,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&t, |&(j, _)| j)
            .map_or(0.0, |p| row[p].1)
    }

    /// Indices of rows whose weights are all zero.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].is_empty())
            .collect()
    }

    /// Number of terms with positive total weight.
    pub fn effective_terms(&self) -> usize {
        let mut used = vec![false; self.n_terms];
        for row in &self.rows {
            for &(t, _) in row {
                used[t] = true;
            }
        }
        used.into_iter().filter(|&u| u).count()
    }

    pub fn scale(&self, factor: f64) -> Self {
        WeightedDocTermMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(t, w)| (t, w * factor)).collect())
                .collect(),
            n_terms: self.n_terms,
            mode: self.mode,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![0.0; self.n_terms];
                for &(t, w) in r {
                    dense[t] = w;
                }
                dense
            })
            .collect()
    }
}

/// `tf(d,t) * ln(N / df(t))` over the rows of a count matrix. Rows left with
/// no positive weight are reported through a warning.
pub fn tfidf_transform(bow: &WeightedDocTermMatrix) -> Result<WeightedDocTermMatrix> {
    if bow.mode != InputMode::Bow {
        return Err(Error::Parameter(format!(
            "tf-idf expects a bag-of-words matrix, got {}",
            bow.mode
        )));
    }
    let n = bow.n_docs() as f64;
    let mut df = vec![0usize; bow.n_terms];
    for row in &bow.rows {
        for &(t, _) in row {
            df[t] += 1;
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = bow
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&(t, tf)| (t, tf * (n / df[t] as f64).ln()))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let out = WeightedDocTermMatrix {
        rows,
        n_terms: bow.n_terms,
        mode: InputMode::Tfidf,
    };
    let empty = out.empty_rows().len();
    if empty > 0 {
        log::warn!("{empty} row(s) have no positive tf-idf weight");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bow(rows: Vec<Vec<(usize, f64)>>, v: usize) -> WeightedDocTermMatrix {
        WeightedDocTermMatrix::new(rows, v, InputMode::Bow).unwrap()
    }

    #[test]
    fn term_in_every_doc_gets_zero_weight() {
        let m = bow(vec![vec![(0, 3.0), (1, 1.0)], vec![(0, 1.0)]], 2);
        let t = tfidf_transform(&m).unwrap();
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(1, 0), 0.0);
        assert!((t.get(0, 1) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(t.empty_rows(), vec![1]);
    }

    #[test]
    fn single_document_has_zero_idf() {
        let m = bow(vec![vec![(0, 2.0), (1, 5.0)]], 2);
        let t = tfidf_transform(&m).unwrap();
        assert!(t.row(0).is_empty());
    }

    #[test]
    fn three_doc_hand_oracle() {
        // term 0 appears twice in doc 0 only: 2 * ln(3)
        let m = bow(
            vec![vec![(0, 2.0), (1, 1.0)], vec![(1, 1.0)], vec![(1, 4.0)]],
            2,
        );
        let t = tfidf_transform(&m).unwrap();
        assert!((t.get(0, 0) - 2.0 * 3f64.ln()).abs() < 1e-12);
        assert!((t.get(0, 0) - 2.197).abs() < 1e-3);
        assert_eq!(t.mode(), InputMode::Tfidf);
        assert!(tfidf_transform(&t).is_err());
    }

    #[test]
    fn rejects_out_of_range_terms_and_negative_weights() {
        assert!(WeightedDocTermMatrix::new(vec![vec![(3, 1.0)]], 3, InputMode::Bow).is_err());
        assert!(WeightedDocTermMatrix::new(vec![vec![(0, -1.0)]], 3, InputMode::Bow).is_err());
        assert!(WeightedDocTermMatrix::new(vec![vec![(0, f64::NAN)]], 3, InputMode::Bow).is_err());
    }

    #[test]
    fn from_documents_counts_only_retained_vocab_tokens() {
        let mut docs = vec![
            TokenizedDocument::new("a", 1960, vec!["x".into(), "y".into(), "x".into(), "oov".into()]),
            TokenizedDocument::new("b", 1960, vec!["y".into()]),
        ];
        docs[1].retained = false;
        let vocab = Vocabulary::from_terms(["x", "y"], &docs);
        let m = WeightedDocTermMatrix::from_documents(&docs, &vocab, InputMode::Bow);
        assert_eq!(m.n_docs(), 1);
        assert_eq!(m.row(0), &[(0, 2.0), (1, 1.0)]);
    }
}
