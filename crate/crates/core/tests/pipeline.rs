mod support;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use chronotopic::corpus::TimeBins;
use chronotopic::hpo::{objective_topic_quality, Params, QualityWeights};
use chronotopic::pipeline::{
    cmd_dynamic, cmd_evaluate, cmd_fit, cmd_prepare, cmd_report, cmd_tune, document_embeddings, load_prepared,
    stage_seed, EmbeddingSource, FitOptions, ModelKind, OutputLock, PipelineConfig,
};
use chronotopic::topics::TopicModel;
use chronotopic::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chronotopic"))
}

/// Whole-corpus only, so a single subset is fitted.
fn quick_config(out: &Path) -> PipelineConfig {
    let mut cfg = support::fixture_config(out);
    cfg.time.per_bin = false;
    cfg
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn prepare_matches_fixture_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let manifest = support::fixture_manifest();
    let (s, run) = cmd_prepare(&cfg).unwrap();
    assert_eq!((s.docs_in, s.docs_out), (manifest.n_docs, manifest.n_docs));
    assert_eq!(s.bin_sizes, manifest.bin_sizes);
    assert!((s.entity_coverage.unwrap() - manifest.entity_coverage).abs() < 1e-12);
    assert_eq!(s.entities_ignored, Some(manifest.unknown_entity_uids));
    assert!(s.vocab_size > 50);
    assert_eq!(run.config_sha256.len(), 64);
    assert_eq!(run.seed, 7);

    let first = read_tree(&tmp.path().join("prepared"));
    let (_, again) = cmd_prepare(&cfg).unwrap();
    assert_eq!(read_tree(&tmp.path().join("prepared")), first);
    assert_eq!(again.config_sha256, run.config_sha256);
}

#[test]
fn missing_corpus_exits_2_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[corpus]\npath = \"nowhere.jsonl\"\n[embeddings]\nsource = \"hash\"\n").unwrap();
    let out = bin().args(["prepare", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.jsonl"));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "[cluster]\nn_neigbors = 5\n").unwrap();
    let out = bin().args(["prepare", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_neigbors"));
}

#[test]
fn nmf_dump_has_one_row_per_topic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    cmd_prepare(&cfg).unwrap();
    let opts = FitOptions {
        model: Some(ModelKind::Nmf),
        k: Some(10),
    };
    let (reports, run) = cmd_fit(&cfg, &opts).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].n_topics, 10);
    let dir = tmp.path().join("models/nmf/all/k10");
    let meta = fs::read_to_string(dir.join("meta.jsonl")).unwrap();
    let h: serde_json::Value = meta
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["matrix"] == "h")
        .unwrap();
    assert_eq!(h["rows"], 10);
    let words = fs::read_to_string(dir.join("topic_words.csv")).unwrap();
    let mut ids: Vec<&str> = words.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 10);

    // stage times account for the run
    let staged: f64 = run.stages.iter().map(|s| s.seconds).sum();
    assert!(run.stages.iter().all(|s| s.seconds >= 0.0));
    assert!(staged <= run.total_seconds + 1e-9);
    assert!(staged >= 0.9 * run.total_seconds, "{staged} of {}", run.total_seconds);
}

#[test]
fn cluster_discovers_themes_and_reduces_to_k() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    cmd_prepare(&cfg).unwrap();
    let opts = FitOptions {
        model: Some(ModelKind::Cluster),
        k: Some(10),
    };
    let (reports, _) = cmd_fit(&cfg, &opts).unwrap();
    let base: TopicModel =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("models/cluster/all/base/model.json")).unwrap())
            .unwrap();
    assert!(base.n_topics() >= 4, "{} topics", base.n_topics());
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    if base.n_topics() >= 10 {
        assert_eq!(r.scored_topics, 10);
        let sizes = fs::read_to_string(tmp.path().join("models/cluster/all/k10/topic_sizes.csv")).unwrap();
        // header, outlier row, ten topics
        assert_eq!(sizes.lines().count(), 12);
    } else {
        assert_eq!(r.scored_topics, base.n_topics());
    }
    assert!((-1.0..=1.0).contains(&r.tc) && r.td > 0.0 && r.td <= 1.0);
}

#[test]
fn evaluate_without_models_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let err = cmd_evaluate(&cfg).unwrap_err();
    assert!(matches!(err, Error::MissingModels(_)));
    assert_eq!(err.exit_code(), 4);
    let out = bin()
        .args(["evaluate", "--config"])
        .arg(support::fixture_dir().join("config.toml"))
        .arg("--output-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn dynamic_without_bin_map_exits_5() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    cmd_prepare(&cfg).unwrap();
    fs::remove_file(tmp.path().join("prepared/bins.json")).unwrap();
    let err = cmd_dynamic(&cfg).unwrap_err();
    assert!(matches!(err, Error::MissingTemporal(_)));
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn misaligned_embeddings_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(support::fixture_dir().join("corpus.jsonl")).unwrap();
    let mut extra: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    extra["uid"] = "not-embedded".into();
    fs::write(tmp.path().join("corpus.jsonl"), format!("{text}{extra}\n")).unwrap();
    let mut cfg = quick_config(&tmp.path().join("out"));
    cfg.corpus.path = tmp.path().join("corpus.jsonl");
    cfg.embeddings.source = EmbeddingSource::File;
    cmd_prepare(&cfg).unwrap();
    let err = document_embeddings(&cfg, &load_prepared(&cfg).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("not-embedded"));
}

#[test]
fn single_bin_charts_are_flat_and_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick_config(tmp.path());
    cfg.time.bins = TimeBins::new(vec![[1955, 2018]]).unwrap();
    cfg.models.topic_counts = vec![10];
    cmd_prepare(&cfg).unwrap();
    let opts = FitOptions {
        model: Some(ModelKind::Cluster),
        k: None,
    };
    cmd_fit(&cfg, &opts).unwrap();
    let (tot, _) = cmd_dynamic(&cfg).unwrap();
    assert_eq!(tot.bins.len(), 1);
    let svgs: Vec<PathBuf> = fs::read_dir(tmp.path().join("dynamic"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty());
    let mut lines = 0;
    for p in &svgs {
        let s = fs::read_to_string(p).unwrap();
        assert!(s.starts_with("<svg "));
        assert!(s.contains(r#"width="800" height="420" viewBox="0 0 800 420""#));
        assert!(s.trim_end().ends_with("</svg>"));
        for tag in s.split("<polyline").skip(1) {
            let pts = tag.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
            let coords: Vec<(f64, f64)> = pts
                .split_whitespace()
                .map(|xy| {
                    let (x, y) = xy.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect();
            assert_eq!(coords.len(), 2);
            assert_eq!(coords[0].1, coords[1].1);
            assert!(coords.iter().all(|&(x, y)| (0.0..=800.0).contains(&x) && (0.0..=420.0).contains(&y)));
            lines += 1;
        }
    }
    assert_eq!(lines, tot.rows.len());
}

#[test]
fn output_lock_excludes_a_second_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let held = OutputLock::acquire(tmp.path()).unwrap();
    let err = cmd_prepare(&cfg).unwrap_err();
    assert!(matches!(err, Error::Locked(_)), "{err}");
    drop(held);
    cmd_prepare(&cfg).unwrap();
    assert!(OutputLock::acquire(tmp.path()).is_ok());
}

#[test]
fn default_objective_is_finite_and_below_penalty() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    cmd_prepare(&cfg).unwrap();
    let prepared = load_prepared(&cfg).unwrap();
    let rows = document_embeddings(&cfg, &prepared).unwrap();
    let weights = QualityWeights {
        w_tc: 1.0,
        w_td: 1.0,
        window: 10,
        top_k: 10,
    };
    let loss = objective_topic_quality(
        &Params::new(),
        &prepared.docs,
        &prepared.vocab,
        &rows,
        &cfg.cluster,
        &weights,
        stage_seed(cfg.seed, "cluster/all"),
    )
    .unwrap();
    assert!(loss.is_finite() && loss < 1.0, "{loss}");
}

#[test]
fn tune_writes_trials_and_a_fragment_fit_accepts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    cmd_prepare(&cfg).unwrap();
    let (o, _) = cmd_tune(&cfg, Some(5)).unwrap();
    assert_eq!(o.trials.len(), 5);
    let trials = tmp.path().join("tune/trials.jsonl");
    assert_eq!(fs::read_to_string(&trials).unwrap().lines().count(), 5);
    // the best trial is never worse than the startup median
    let losses: Vec<f64> = o.trials.trials.iter().filter_map(|t| t.loss).collect();
    assert!(o.best_loss <= support::median(losses));

    let fragment = tmp.path().join("tune/best_params.toml");
    let mut tuned = cfg.clone();
    tuned.apply_params_file(&fragment).unwrap();
    for (name, v) in &o.best {
        let got = match name.as_str() {
            "n_neighbors" => tuned.cluster.n_neighbors as i64,
            "n_components" => tuned.cluster.n_components as i64,
            "min_cluster_size" => tuned.cluster.min_cluster_size as i64,
            "min_samples" => tuned.cluster.min_samples.unwrap() as i64,
            "min_topic_size" => tuned.cluster.min_topic_size.unwrap() as i64,
            other => panic!("unexpected {other}"),
        };
        assert_eq!(Some(got), v.as_i64(), "{name}");
    }
    let opts = FitOptions {
        model: Some(ModelKind::Cluster),
        k: Some(10),
    };
    cmd_fit(&tuned, &opts).unwrap();

    let (resumed, _) = cmd_tune(&cfg, Some(7)).unwrap();
    assert_eq!(resumed.trials.len(), 7);
    assert_eq!(fs::read_to_string(&trials).unwrap().lines().count(), 7);
    assert_eq!(resumed.trials.trials[..5], o.trials.trials[..]);
}

#[test]
fn cli_runs_the_whole_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = support::fixture_config(tmp.path());
    let out = bin()
        .args(["run", "--config"])
        .arg(support::fixture_dir().join("config.toml"))
        .arg("--output-dir")
        .arg(tmp.path())
        .env("CHRONOTOPIC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("| Model | #T |"), "{stdout}");
    for f in [
        "tables/comparison.csv",
        "tables/comparison.md",
        "dynamic/topics_over_time.csv",
        "index.html",
        "manifests/prepare.json",
        "manifests/fit.json",
        "manifests/report.json",
    ] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    // the report links what the run produced
    let (index, _) = cmd_report(&cfg).unwrap();
    let html = fs::read_to_string(index).unwrap();
    assert!(html.contains("tables/comparison.md") && html.contains(".svg"));
}
