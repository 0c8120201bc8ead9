//! Shared ranking rule for every "top words" list.

use crate::corpus::Vocabulary;

/// Ranked `(term, score)` pairs.
pub type RankedTerms = Vec<(String, f64)>;

/// Indices of the `n` largest positive scores, descending, ties broken by
/// lower index. Vocabulary ids are lexicographic, so index order is term
/// order.
pub fn top_indices(scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

pub fn top_terms(scores: &[f64], vocab: &Vocabulary, n: usize) -> RankedTerms {
    top_indices(scores, n)
        .into_iter()
        .map(|i| (vocab.term(i).to_string(), scores[i]))
        .collect()
}

/// Clips `n` to the vocabulary size, warning when it had to.
pub(crate) fn clip_top_n(n: usize, available: usize) -> usize {
    if n > available {
        log::warn!("top_n={n} exceeds vocabulary size {available}; clipping");
        available
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_lower_index_and_zeros_are_dropped() {
        assert_eq!(top_indices(&[1.0, 2.0, 2.0, 0.0, 1.0], 10), vec![1, 2, 0, 4]);
        assert_eq!(top_indices(&[0.0, 3.0, 0.0], 5), vec![1]);
        assert!(top_indices(&[1.0, 2.0], 0).is_empty());
    }
}
