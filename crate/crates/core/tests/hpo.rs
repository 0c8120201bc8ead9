mod support;

use std::collections::BTreeMap;

use chronotopic::hpo::{
    fmin, split_sizes, tpe_suggest, Domain, FminOptions, ParamValue, Parzen, SearchSpace, TpeParams, Trial,
    TrialStatus, Trials,
};
use proptest::prelude::*;

fn quadratic_space() -> SearchSpace {
    SearchSpace::new(
        BTreeMap::from([("x".to_string(), Domain::Uniform { lo: -5.0, hi: 5.0 })]),
        vec![],
    )
    .unwrap()
}

fn quadratic(p: &BTreeMap<String, ParamValue>) -> chronotopic::Result<f64> {
    let x = p["x"].as_f64().unwrap();
    Ok((x - 2.0) * (x - 2.0))
}

fn ok_trial(index: usize, params: BTreeMap<String, ParamValue>, loss: f64) -> Trial {
    Trial {
        index,
        params,
        loss: Some(loss),
        status: TrialStatus::Ok,
        duration_seconds: 0.0,
        error: None,
    }
}

#[test]
fn quadratic_beats_random_search() {
    let mut hits = 0;
    let mut tpe_best = Vec::new();
    let mut random_best = Vec::new();
    for seed in 0..20 {
        let (best, trials) = fmin(quadratic, &quadratic_space(), &FminOptions::new(50, seed)).unwrap();
        assert_eq!(trials.len(), 50);
        let x = best["x"].as_f64().unwrap();
        if (x - 2.0).abs() <= 0.5 {
            hits += 1;
        }
        tpe_best.push(trials.best().unwrap().loss.unwrap());
        random_best.push(support::random_search_best(seed, 50));
    }
    let (m_tpe, m_rand) = (support::median(tpe_best), support::median(random_best));
    assert!(hits >= 18, "only {hits}/20 within 0.5");
    assert!(m_tpe < m_rand, "tpe median {m_tpe} vs random {m_rand}");
}

#[test]
fn concentrated_good_set_stays_within_one_bandwidth() {
    let space = quadratic_space();
    let x_star = 1.3;
    let mut trials = Trials::default();
    // three good trials at x*, nine spread elsewhere
    for i in 0..12 {
        let (x, loss) = if i < 3 { (x_star, 0.0) } else { (-5.0 + 10.0 * (i as f64 - 3.0) / 8.0, 10.0 + i as f64) };
        trials
            .trials
            .push(ok_trial(i, BTreeMap::from([("x".into(), ParamValue::Float(x))]), loss));
    }
    let good: Vec<ParamValue> = vec![ParamValue::Float(x_star); 3];
    let bw = Parzen::fit(&space.params["x"], &good.iter().collect::<Vec<_>>())
        .bandwidth()
        .unwrap();
    assert!((bw - 10.0 / 3f64.sqrt()).abs() < 1e-12);
    let near = (0..100)
        .filter(|&seed| {
            let p = tpe_suggest(&trials, &space, &TpeParams::default(), seed).unwrap();
            (p["x"].as_f64().unwrap() - x_star).abs() <= bw
        })
        .count();
    assert!(near >= 90, "{near}/100");
}

#[test]
fn categorical_ratio_argmax() {
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
    let tpe = TpeParams {
        gamma: 0.5,
        n_startup: 0,
        n_candidates: 24,
    };
    let mut trials = Trials::default();
    for i in 0..6 {
        let c = if i < 3 { "a" } else { "b" };
        trials.trials.push(ok_trial(
            i,
            BTreeMap::from([("c".into(), ParamValue::Choice(c.into()))]),
            i as f64,
        ));
    }
    // smoothed: l(a) = 4/5, l(b) = 1/5, g(a) = 1/5, g(b) = 4/5
    let ratio_a = (4.0 / 5.0) / (1.0 / 5.0);
    let ratio_b = (1.0 / 5.0) / (4.0 / 5.0);
    assert!(ratio_a > ratio_b);
    for seed in 0..50 {
        let p = tpe_suggest(&trials, &space, &tpe, seed).unwrap();
        assert_eq!(p["c"], ParamValue::Choice("a".into()));
    }
}

#[test]
fn single_evaluation_is_the_prior_draw() {
    let space = quadratic_space();
    let prior = tpe_suggest(&Trials::default(), &space, &TpeParams::default(), 9).unwrap();
    let (best, trials) = fmin(quadratic, &space, &FminOptions::new(1, 9)).unwrap();
    assert_eq!(trials.len(), 1);
    assert_eq!(best, prior);
}

#[test]
fn resume_runs_only_the_remaining_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.jsonl");
    let mut opts = FminOptions::new(10, 4);
    opts.trials_path = Some(path.clone());
    fmin(quadratic, &quadratic_space(), &opts).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 10);

    let mut calls = 0;
    opts.max_evals = 20;
    let (_, trials) = fmin(
        |p| {
            calls += 1;
            quadratic(p)
        },
        &quadratic_space(),
        &opts,
    )
    .unwrap();
    assert_eq!(calls, 10);
    assert_eq!(trials.len(), 20);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 20);

    // a fresh uninterrupted run reaches the same history
    let (_, straight) = fmin(quadratic, &quadratic_space(), &FminOptions::new(20, 4)).unwrap();
    let strip = |t: &Trials| t.trials.iter().map(|t| (t.params.clone(), t.loss)).collect::<Vec<_>>();
    assert_eq!(strip(&trials), strip(&straight));
}

#[test]
fn failures_count_but_are_not_modeled() {
    let mut n = 0;
    let (_, trials) = fmin(
        |p| {
            n += 1;
            if n % 3 == 0 {
                Err(chronotopic::Error::Domain("injected".into()))
            } else if n % 5 == 0 {
                Ok(f64::NAN)
            } else {
                quadratic(p)
            }
        },
        &quadratic_space(),
        &FminOptions::new(30, 2),
    )
    .unwrap();
    assert_eq!(trials.len(), 30);
    let failed = trials.trials.iter().filter(|t| t.status == TrialStatus::Failed).count();
    // multiples of 3, plus 5, 10, 20, 25
    assert_eq!(failed, 14);
    assert!(trials.trials.iter().all(|t| (t.status == TrialStatus::Ok) == t.loss.is_some()));
}

#[test]
fn default_space_respects_its_constraint() {
    let space = SearchSpace::default_topic_space();
    let (_, trials) = fmin(
        |p| Ok(p["min_samples"].as_f64().unwrap() - p["min_topic_size"].as_f64().unwrap() / 10.0),
        &space,
        &FminOptions::new(40, 11),
    )
    .unwrap();
    for t in &trials.trials {
        assert!(space.contains(&t.params), "{:?}", t.params);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trials_round_trip(losses in prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..20), seed in 0u64..1000) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let mut r = support::rng(seed);
        use rand::Rng;
        let trials = Trials {
            trials: losses
                .iter()
                .enumerate()
                .map(|(i, l)| Trial {
                    index: i,
                    params: BTreeMap::from([
                        ("x".into(), ParamValue::Float(r.random::<f64>() * 1e-3 + 1.0 / 3.0)),
                        ("n".into(), ParamValue::Int(r.random_range(-50..50))),
                        ("c".into(), ParamValue::Choice(format!("opt{}", i % 3))),
                    ]),
                    loss: *l,
                    status: if l.is_some() { TrialStatus::Ok } else { TrialStatus::Failed },
                    duration_seconds: r.random::<f64>(),
                    error: l.is_none().then(|| "failed".to_string()),
                })
                .collect(),
        };
        trials.save(&path).unwrap();
        prop_assert_eq!(Trials::load(&path).unwrap(), trials);
    }

    #[test]
    fn split_partitions_ok_trials(n in 1usize..500, gamma in 0.01f64..1.0) {
        let (l, g) = split_sizes(n, gamma);
        prop_assert_eq!(l, ((gamma * n as f64).ceil() as usize).max(1));
        prop_assert_eq!(l + g, n);
    }

    #[test]
    fn suggestions_stay_in_domain(seed in 0u64..10_000, n_hist in 0usize..30) {
        let space = SearchSpace::default_topic_space();
        let mut trials = Trials::default();
        let mut r = support::rng(seed);
        use rand::Rng;
        for i in 0..n_hist {
            let p = tpe_suggest(&trials, &space, &TpeParams::default(), seed).unwrap();
            trials.trials.push(ok_trial(i, p, r.random::<f64>()));
        }
        let p = tpe_suggest(&trials, &space, &TpeParams::default(), seed).unwrap();
        prop_assert!(space.contains(&p));
    }

    #[test]
    fn best_index_is_min_finite_loss(losses in prop::collection::vec(prop::option::of(-100f64..100.0), 1..30)) {
        let trials = Trials {
            trials: losses.iter().enumerate().map(|(i, l)| Trial {
                index: i,
                params: BTreeMap::new(),
                loss: *l,
                status: if l.is_some() { TrialStatus::Ok } else { TrialStatus::Failed },
                duration_seconds: 0.0,
                error: None,
            }).collect(),
        };
        let expect = losses.iter().enumerate().filter_map(|(i, l)| l.map(|l| (l, i)))
            .fold(None, |acc: Option<(f64, usize)>, (l, i)| match acc { Some((b, _)) if b <= l => acc, _ => Some((l, i)) })
            .map(|(_, i)| i);
        prop_assert_eq!(trials.best_index(), expect);
    }
}
