mod support;

use chronotopic::classical::{
    fit_lda, fit_nmf, nmf_topic_words, tfidf_transform, InputMode, LdaParams, NmfParams,
    WeightedDocTermMatrix,
};
use chronotopic::corpus::{TokenizedDocument, Vocabulary};
use proptest::prelude::*;

fn vocab_of(v: usize) -> Vocabulary {
    let terms: Vec<String> = (0..v).map(|j| format!("t{j:03}")).collect();
    let docs = vec![TokenizedDocument::new("d", 2000, terms.clone())];
    Vocabulary::from_terms(terms.iter().map(String::as_str), &docs)
}

#[test]
fn lda_recovers_generated_topics() {
    let (m, truth) = support::lda_corpus(3, 3, 60, 300, 60);
    let model = fit_lda(&m, &LdaParams::new(3, 5)).unwrap();
    let score = support::matched_mean_cosine(&model.topic_distributions(), &truth);
    assert!(score >= 0.8, "matched cosine {score}");
}

#[test]
fn lda_handles_tfidf_and_entity_inputs() {
    let (m, _) = support::lda_corpus(8, 3, 40, 120, 40);
    let t = tfidf_transform(&m).unwrap();
    let model = fit_lda(&t, &LdaParams::new(3, 1)).unwrap();
    assert_eq!(model.topic_distributions().len(), 3);
    let ent = WeightedDocTermMatrix::new(m.rows().to_vec(), m.n_terms(), InputMode::Entity).unwrap();
    assert!(fit_lda(&ent, &LdaParams::new(3, 1)).is_ok());
}

#[test]
fn nmf_recovers_generating_supports() {
    // H rows with disjoint supports; the first rows of W are pure so the
    // factorization is unique up to scaling
    let v = 10;
    let rows: Vec<Vec<(usize, f64)>> = (0..20)
        .map(|i| {
            let (a, b) = match i {
                0..=3 => (1.0 + i as f64, 0.0),
                4..=7 => (0.0, i as f64 - 3.0),
                _ => (1.0 + (i % 3) as f64, 0.5 + (i % 5) as f64),
            };
            (0..v)
                .map(|j| (j, if j < 5 { a * (1.0 + j as f64) } else { b * (j as f64 - 3.0) }))
                .filter(|&(_, x)| x > 0.0)
                .collect()
        })
        .collect();
    let m = WeightedDocTermMatrix::new(rows, v, InputMode::Bow).unwrap();
    let mut p = NmfParams::new(2, 4);
    p.tol = 0.0;
    let model = fit_nmf(&m, &p).unwrap();
    assert!(model.relative_error(&m) <= 1e-3);
    let vocab = vocab_of(v);
    // support = terms carrying more than 1% of the topic's top weight
    let mut supports: Vec<Vec<usize>> = nmf_topic_words(&model, &vocab, v)
        .iter()
        .map(|ws| {
            let top = ws[0].1;
            let mut ids: Vec<usize> = ws
                .iter()
                .filter(|(_, w)| *w > 0.01 * top)
                .map(|(t, _)| vocab.id(t).unwrap())
                .collect();
            ids.sort();
            ids
        })
        .collect();
    supports.sort();
    assert_eq!(supports, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
}

#[test]
fn nmf_rankings_survive_rescaling() {
    let m = support::sparse_matrix(21, 30, 25, 0.3);
    let vocab = vocab_of(25);
    let base = nmf_topic_words(&fit_nmf(&m, &NmfParams::new(4, 2)).unwrap(), &vocab, 10);
    for c in [0.25, 3.7, 1000.0] {
        let scaled = nmf_topic_words(&fit_nmf(&m.scale(c), &NmfParams::new(4, 2)).unwrap(), &vocab, 10);
        let names = |x: &Vec<Vec<(String, f64)>>| -> Vec<Vec<String>> {
            x.iter().map(|t| t.iter().map(|(s, _)| s.clone()).collect()).collect()
        };
        assert_eq!(names(&base), names(&scaled), "scale {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nmf_factors_stay_finite_and_non_negative(
        seed in 0u64..10_000,
        n in 3usize..15,
        v in 3usize..15,
        density in 0.1f64..0.9,
    ) {
        let m = support::sparse_matrix(seed, n, v, density);
        let k = 2.min(n.min(v));
        prop_assume!(n - m.empty_rows().len() >= k);
        let mut p = NmfParams::new(k, seed);
        p.iters = 60;
        let model = fit_nmf(&m, &p).unwrap();
        prop_assert!(model.w.iter().chain(&model.h).flatten().all(|x| x.is_finite() && *x >= 0.0));
        for w in model.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical(seed in 0u64..1000) {
        let m = support::sparse_matrix(seed, 12, 9, 0.5);
        let p = NmfParams::new(2, seed);
        prop_assert_eq!(fit_nmf(&m, &p).unwrap(), fit_nmf(&m, &p).unwrap());
        let l = LdaParams::new(2, seed);
        prop_assert_eq!(fit_lda(&m, &l).unwrap().topic_word, fit_lda(&m, &l).unwrap().topic_word);
    }

    #[test]
    fn lda_doc_rows_normalize(seed in 0u64..1000) {
        let m = support::sparse_matrix(seed, 10, 8, 0.5);
        let model = fit_lda(&m, &LdaParams::new(2, seed)).unwrap();
        for row in model.doc_distributions() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
        }
    }
}

#[test]
fn single_topic_model_ranks_corpus_frequencies() {
    use chronotopic::classical::{lda_topic_words, LdaModel};
    let vocab = vocab_of(4);
    let model = LdaModel {
        k: 1,
        alpha: 1.0,
        eta: 1.0,
        topic_word: vec![vec![3.0, 9.0, 1.0, 9.0]],
        doc_topic: vec![vec![1.0]],
        bound_trace: vec![],
    };
    let words = lda_topic_words(&model, &vocab, 10);
    let names: Vec<&str> = words[0].iter().map(|(t, _)| t.as_str()).collect();
    assert_eq!(names, ["t001", "t003", "t000", "t002"]);
    assert!((words[0][0].1 - 9.0 / 22.0).abs() < 1e-12);
}
