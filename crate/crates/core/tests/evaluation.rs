mod support;

use std::collections::HashSet;

use chronotopic::corpus::TokenizedDocument;
use chronotopic::evaluation::{npmi_coherence, topic_diversity};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn doc(words: &str) -> TokenizedDocument {
    TokenizedDocument::new("d", 2000, words.split_whitespace().map(String::from).collect())
}

#[test]
fn four_document_toy_matches_window_oracle() {
    let raw = [
        "reactor fuel core plant reactor energy grid",
        "vote party reactor senate",
        "energy grid plant fuel price market oil energy reactor core fuel",
        "party vote election senate ballot party",
    ];
    let docs: Vec<TokenizedDocument> = raw.iter().map(|r| doc(r)).collect();
    let split: Vec<Vec<&str>> = raw.iter().map(|r| r.split_whitespace().collect()).collect();
    let topics = vec![
        vec!["reactor", "fuel", "core", "energy"],
        vec!["vote", "party", "senate", "absent"],
    ];
    let owned: Vec<Vec<String>> = topics.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect();
    for w in [2, 3, 5, 10] {
        let got = npmi_coherence(&owned, &docs, w).unwrap();
        let want = support::window_oracle(&topics, &split, w);
        assert!((got - want).abs() < 1e-9, "window {w}: {got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coherence_matches_oracle_and_ignores_order(seed in 0u64..100_000, w in 1usize..8) {
        let mut r = support::rng(seed);
        let vocab: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
        let docs: Vec<Vec<&str>> = (0..r.random_range(1..6))
            .map(|_| (0..r.random_range(1..15)).map(|_| vocab[r.random_range(0..12)].as_str()).collect())
            .collect();
        let topics: Vec<Vec<&str>> = (0..3)
            .map(|_| {
                let mut v: Vec<&str> = vocab.iter().map(String::as_str).collect();
                v.shuffle(&mut r);
                v.truncate(4);
                v
            })
            .collect();
        let tdocs: Vec<TokenizedDocument> = docs.iter().map(|d| doc(&d.join(" "))).collect();
        let owned: Vec<Vec<String>> = topics.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect();
        match npmi_coherence(&owned, &tdocs, w) {
            Ok(got) => {
                prop_assert!((got - support::window_oracle(&topics, &docs, w)).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&got));
                let mut permuted = owned.clone();
                permuted.reverse();
                for t in &mut permuted {
                    t.reverse();
                }
                prop_assert!((npmi_coherence(&permuted, &tdocs, w).unwrap() - got).abs() < 1e-12);
            }
            Err(_) => {
                // only when no topic term occurs anywhere
                let present: HashSet<&str> = docs.iter().flatten().copied().collect();
                prop_assert!(topics.iter().all(|t| t.iter().filter(|x| present.contains(*x)).count() < 2
                    || t.iter().all(|x| !present.contains(x))));
            }
        }
    }

    #[test]
    fn diversity_falls_as_lists_overlap(seed in 0u64..10_000, k_topics in 2usize..6) {
        let mut r = support::rng(seed);
        let mut lists: Vec<Vec<String>> = (0..k_topics)
            .map(|t| (0..10).map(|i| format!("w{t}_{i}")).collect())
            .collect();
        let mut last = topic_diversity(&lists, 10).unwrap();
        prop_assert_eq!(last, 1.0);
        for _ in 0..20 {
            // copy a word from topic 0 over a random slot of another topic
            let t = r.random_range(1..k_topics);
            let i = r.random_range(0..10);
            lists[t][i] = lists[0][r.random_range(0..10)].clone();
            let td = topic_diversity(&lists, 10).unwrap();
            prop_assert!(td <= last + 1e-15);
            let mut shuffled = lists.clone();
            shuffled.shuffle(&mut r);
            prop_assert_eq!(topic_diversity(&shuffled, 10).unwrap(), td);
            last = td;
        }
    }
}

#[test]
fn identical_lists_give_reciprocal_diversity() {
    let l: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    for k in 1..6 {
        let lists = vec![l.clone(); k];
        assert_eq!(topic_diversity(&lists, 10).unwrap(), 1.0 / k as f64);
    }
}
