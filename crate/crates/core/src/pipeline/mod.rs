//! Config-driven commands: prepare, fit, evaluate, dynamic, tune, report.

pub mod config;
pub mod svg;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{
    fit_lda, fit_nmf, lda_topic_words, nmf_topic_words, tfidf_transform, InputMode, LdaParams, NmfParams,
    WeightedDocTermMatrix,
};
use crate::cluster::fit_cluster_model;
use crate::corpus::{
    assign_bins, build_vocabulary, load_corpus, load_entity_annotations, EntityAnnotations, LemmaMap, Preprocessor,
    Stopwords, TimeBins, TokenizedDocument, Vocabulary,
};
use crate::dynamic::{topics_over_time, TopicsOverTime};
use crate::embedding::{hash_embed, load_embeddings, seeded_hash, DenseMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{compare, evaluate_topics, ComparisonTable, EvalReport, SizeDistribution};
use crate::hpo::{fmin, objective_topic_quality, FminOptions, ParamValue, Params, QualityWeights, Trials, TUNED_PARAMS};
use crate::rank::RankedTerms;
use crate::topics::{reduce_topics, TopicContext, TopicMergeTrace, TopicModel};

pub use config::{EmbeddingSource, ModelKind, PipelineConfig};

/// Version stamped on every artifact family in the run manifest.
pub const FORMAT_VERSION: u32 = 1;
pub const ALL_SUBSET: &str = "all";
const LOCK_FILE: &str = ".chronotopic.lock";

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| json_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).map_err(|e| json_err(path, e))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-stage seed derived from the top-level one.
pub fn stage_seed(seed: u64, label: &str) -> u64 {
    seeded_hash(seed, label.as_bytes())
}

/// Exclusive hold on an output directory for one command.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        mkdir(dir)?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub crate_version: String,
    pub artifact_versions: BTreeMap<String, u32>,
    pub stages: Vec<StageTime>,
    pub total_seconds: f64,
}

struct Run {
    manifest: RunManifest,
    start: Instant,
    out: PathBuf,
    _lock: OutputLock,
}

impl Run {
    fn begin(cfg: &PipelineConfig, command: &str) -> Result<Self> {
        let start = Instant::now();
        let out = cfg.out_dir();
        let lock = OutputLock::acquire(&out)?;
        let artifact_versions = ["prepared", "models", "tables", "dynamic", "tune"]
            .into_iter()
            .map(|s| (s.to_string(), FORMAT_VERSION))
            .collect();
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                config_sha256: cfg.hash.clone(),
                seed: cfg.seed,
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                artifact_versions,
                stages: Vec::new(),
                total_seconds: 0.0,
            },
            start,
            out,
            _lock: lock,
        })
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.manifest.stages.push(StageTime {
            name: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    fn finish(mut self) -> Result<RunManifest> {
        let dir = self.out.join("manifests");
        mkdir(&dir)?;
        self.manifest.total_seconds = self.start.elapsed().as_secs_f64();
        write_json(&dir.join(format!("{}.json", self.manifest.command)), &self.manifest)?;
        Ok(self.manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub docs_in: usize,
    pub docs_out: usize,
    pub vocab_size: usize,
    pub bin_sizes: Vec<usize>,
    pub entity_coverage: Option<f64>,
    pub entities_ignored: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BinMap {
    bins: TimeBins,
    assignment: BTreeMap<String, usize>,
}

/// Prepared corpus artifacts as read back from disk.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Retained documents in corpus order.
    pub docs: Vec<TokenizedDocument>,
    pub vocab: Vocabulary,
    pub entities: Option<EntityAnnotations>,
    pub summary: PrepareSummary,
}

fn prepared_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir().join("prepared")
}

/// Cleans, tokenizes and filters the corpus, builds the vocabulary and the
/// bin map and persists them under `prepared/`.
pub fn cmd_prepare(cfg: &PipelineConfig) -> Result<(PrepareSummary, RunManifest)> {
    cfg.validate()?;
    let mut run = Run::begin(cfg, "prepare")?;
    let summary = run.stage("prepare", || {
        let corpus = load_corpus(&cfg.resolve(&cfg.corpus.path), cfg.corpus_format())?;
        let stopwords = match &cfg.corpus.stopwords {
            Some(p) => Stopwords::from_file(&cfg.resolve(p))?,
            None => Stopwords::english(),
        };
        let lemmas = cfg
            .corpus
            .lemmas
            .as_ref()
            .map(|p| LemmaMap::from_file(&cfg.resolve(p)))
            .transpose()?;
        let pre = Preprocessor {
            stopwords,
            lemmas,
            min_tokens: cfg.corpus.min_tokens,
            filter_stage: cfg.corpus.filter_stage,
        };
        let docs = pre.run(&corpus)?;
        let vocab = build_vocabulary(&docs, cfg.corpus.min_df, cfg.corpus.max_df_ratio)?;
        let retained: Vec<&TokenizedDocument> = docs.iter().filter(|d| d.retained).collect();
        let retained_owned: Vec<TokenizedDocument> = retained.iter().map(|d| (*d).clone()).collect();
        let assignment = assign_bins(&retained_owned, &cfg.time.bins)?;
        let mut bin_sizes = vec![0; cfg.time.bins.len()];
        for b in assignment.values() {
            bin_sizes[*b] += 1;
        }
        let entities = match &cfg.corpus.entities {
            Some(p) => {
                let known: HashSet<String> = corpus.docs().iter().map(|d| d.uid.clone()).collect();
                Some(load_entity_annotations(&cfg.resolve(p), Some(&known))?)
            }
            None => None,
        };
        let summary = PrepareSummary {
            docs_in: corpus.len(),
            docs_out: retained.len(),
            vocab_size: vocab.len(),
            bin_sizes,
            entity_coverage: entities
                .as_ref()
                .map(|e| e.coverage(retained.iter().map(|d| d.uid.as_str()))),
            entities_ignored: entities.as_ref().map(|e| e.ignored),
        };
        let dir = prepared_dir(cfg);
        mkdir(&dir)?;
        write_jsonl(&dir.join("docs.jsonl"), &docs)?;
        write_json(&dir.join("vocab.json"), &vocab)?;
        write_json(
            &dir.join("bins.json"),
            &BinMap {
                bins: cfg.time.bins.clone(),
                assignment,
            },
        )?;
        if let Some(e) = &entities {
            write_json(&dir.join("entities.json"), &e.entities)?;
        }
        write_json(&dir.join("summary.json"), &summary)?;
        Ok(summary)
    })?;
    Ok((summary, run.finish()?))
}

pub fn load_prepared(cfg: &PipelineConfig) -> Result<Prepared> {
    let dir = prepared_dir(cfg);
    let summary_path = dir.join("summary.json");
    if !summary_path.is_file() {
        return Err(Error::Validation(format!(
            "no prepared corpus in {}; run the prepare command first",
            dir.display()
        )));
    }
    let summary: PrepareSummary = read_json(&summary_path)?;
    let docs_path = dir.join("docs.jsonl");
    let text = fs::read_to_string(&docs_path).map_err(|e| Error::io(&docs_path, e))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let d: TokenizedDocument = serde_json::from_str(line).map_err(|e| Error::parse(&docs_path, i + 1, e))?;
        if d.retained {
            docs.push(d);
        }
    }
    let vocab: Vocabulary = read_json(&dir.join("vocab.json"))?;
    let ent_path = dir.join("entities.json");
    let entities = if ent_path.is_file() {
        Some(EntityAnnotations {
            entities: read_json(&ent_path)?,
            ignored: summary.entities_ignored.unwrap_or(0),
        })
    } else {
        None
    };
    Ok(Prepared {
        docs,
        vocab,
        entities,
        summary,
    })
}

fn load_bins(cfg: &PipelineConfig) -> Result<BinMap> {
    let path = prepared_dir(cfg).join("bins.json");
    if !path.is_file() {
        return Err(Error::MissingTemporal(format!("{} not found", path.display())));
    }
    read_json(&path)
}

/// One embedding row per retained document.
pub fn document_embeddings(cfg: &PipelineConfig, prepared: &Prepared) -> Result<Vec<Vec<f64>>> {
    let m = match cfg.embeddings.source {
        EmbeddingSource::File => {
            let all = load_embeddings(
                &cfg.resolve(&cfg.embeddings.vectors),
                &cfg.resolve(&cfg.embeddings.index),
            )?;
            let uids: Vec<&str> = prepared.docs.iter().map(|d| d.uid.as_str()).collect();
            all.align(&uids)?
        }
        EmbeddingSource::Hash => hash_embed(
            &prepared.docs,
            &prepared.vocab,
            cfg.embeddings.dim,
            stage_seed(cfg.seed, "embed"),
        )?,
    };
    Ok((0..m.n()).map(|i| m.row_f64(i)).collect())
}

/// `(label, retained-document indices)` for the whole corpus and each bin.
pub fn subsets(cfg: &PipelineConfig, prepared: &Prepared) -> Result<Vec<(String, Vec<usize>)>> {
    let mut out = vec![(ALL_SUBSET.to_string(), (0..prepared.docs.len()).collect())];
    if cfg.time.per_bin {
        let map = load_bins(cfg)?;
        for b in 0..map.bins.len() {
            let idx: Vec<usize> = prepared
                .docs
                .iter()
                .enumerate()
                .filter(|(_, d)| map.assignment.get(&d.uid) == Some(&b))
                .map(|(i, _)| i)
                .collect();
            if idx.is_empty() {
                log::warn!("time bin {} has no documents", map.bins.label(b));
            } else {
                out.push((map.bins.label(b), idx));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub model: Option<ModelKind>,
    pub k: Option<usize>,
}

fn model_dir(cfg: &PipelineConfig, model: ModelKind, subset: &str) -> PathBuf {
    cfg.out_dir().join("models").join(model.name()).join(subset)
}

fn write_words_csv(path: &Path, topics: &[RankedTerms]) -> Result<()> {
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["topic_id", "rank", "term", "score"]).map_err(err)?;
    for (t, words) in topics.iter().enumerate() {
        for (r, (term, score)) in words.iter().enumerate() {
            w.write_record([t.to_string(), (r + 1).to_string(), term.clone(), format!("{score:.12}")])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_matrix(dir: &Path, name: &str, rows: &[Vec<f64>]) -> Result<serde_json::Value> {
    let file = format!("{name}.bin");
    let m = DenseMatrix::from_f64_rows(rows)?;
    m.write(&dir.join(&file))?;
    Ok(serde_json::json!({
        "matrix": name,
        "file": file,
        "rows": rows.len(),
        "cols": rows.first().map_or(0, Vec::len),
    }))
}

fn write_labels_csv(path: &Path, docs: &[TokenizedDocument], model: &TopicModel) -> Result<()> {
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["uid", "label", "strength"]).map_err(err)?;
    for ((d, l), s) in docs.iter().zip(&model.labels.labels).zip(&model.labels.strengths) {
        w.write_record([d.uid.clone(), l.to_string(), format!("{s:.12}")]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct SubsetInput<'a> {
    label: &'a str,
    docs: Vec<TokenizedDocument>,
    rows: Vec<Vec<f64>>,
    vocab: Vocabulary,
}

fn subset_vocab(cfg: &PipelineConfig, prepared: &Prepared, label: &str, docs: &[TokenizedDocument]) -> Result<Vocabulary> {
    if label == ALL_SUBSET {
        Ok(prepared.vocab.clone())
    } else {
        build_vocabulary(docs, cfg.corpus.min_df, cfg.corpus.max_df_ratio)
    }
}

/// Entity-token documents with at least one vocabulary entity, and their
/// vocabulary.
fn entity_input(
    cfg: &PipelineConfig,
    entities: &EntityAnnotations,
    docs: &[TokenizedDocument],
) -> Result<(Vec<TokenizedDocument>, Vocabulary)> {
    let ent_docs: Vec<TokenizedDocument> = entities
        .documents(docs)
        .into_iter()
        .filter(|d| !d.tokens.is_empty())
        .collect();
    if ent_docs.is_empty() {
        return Err(Error::CorpusTooSmall("no document carries entities".into()));
    }
    let vocab = build_vocabulary(&ent_docs, cfg.corpus.entity_min_df, 1.0)?;
    let kept = ent_docs
        .into_iter()
        .filter(|d| vocab.encode(&d.tokens).next().is_some())
        .collect();
    Ok((kept, vocab))
}

fn skip_or<T>(r: Result<T>, what: &str) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Parameter(_) | Error::EmptyVocabulary { .. } | Error::CorpusTooSmall(_) | Error::UndefinedScore(_))) => {
            log::warn!("skipping {what}: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn fit_classical(
    cfg: &PipelineConfig,
    kind: ModelKind,
    input: &SubsetInput<'_>,
    entities: Option<&EntityAnnotations>,
    ks: &[usize],
) -> Result<Vec<EvalReport>> {
    let mode = kind.input_mode().expect("classical model");
    let (ref_docs, vocab) = match mode {
        InputMode::Entity => {
            let ents = entities.ok_or_else(|| Error::Validation("entity models need prepared entities".into()))?;
            match skip_or(entity_input(cfg, ents, &input.docs), &format!("{kind} on {}", input.label))? {
                Some(v) => v,
                None => return Ok(Vec::new()),
            }
        }
        _ => (input.docs.clone(), input.vocab.clone()),
    };
    let bow = WeightedDocTermMatrix::from_documents(
        &ref_docs,
        &vocab,
        if mode == InputMode::Entity { InputMode::Entity } else { InputMode::Bow },
    );
    let matrix = if mode == InputMode::Tfidf { tfidf_transform(&bow)? } else { bow };
    let top_n = cfg.evaluation.top_k.max(10);
    let mut reports = Vec::new();
    for &k in ks {
        let what = format!("{kind} K={k} on {}", input.label);
        let seed = stage_seed(cfg.seed, &format!("{kind}/{}/{k}", input.label));
        let dir = model_dir(cfg, kind, input.label).join(format!("k{k}"));
        let start = Instant::now();
        let fitted = if kind.is_lda() {
            let mut p = LdaParams::new(k, seed);
            p.alpha = cfg.lda.alpha;
            p.eta = cfg.lda.eta;
            p.epochs = cfg.lda.epochs;
            p.tol = cfg.lda.tol;
            skip_or(fit_lda(&matrix, &p), &what)?.map(|m| {
                let secs = start.elapsed().as_secs_f64();
                let words = lda_topic_words(&m, &vocab, top_n);
                let labels: Vec<i64> = m.dominant_topics().into_iter().map(|t| t as i64).collect();
                let meta = serde_json::json!({
                    "kind": kind.name(), "mode": mode, "subset": input.label, "k": k, "seed": seed,
                    "n_docs": matrix.n_docs(), "n_terms": matrix.n_terms(), "alpha": m.alpha, "eta": m.eta,
                });
                let mats = [("topic_word", m.topic_word.clone()), ("doc_topic", m.doc_topic.clone())];
                (secs, words, labels, meta, mats, ("bound_trace", m.bound_trace.clone()))
            })
        } else {
            let mut p = NmfParams::new(k, seed);
            p.iters = cfg.nmf.iters;
            p.inner = cfg.nmf.inner;
            p.tol = cfg.nmf.tol;
            skip_or(fit_nmf(&matrix, &p), &what)?.map(|m| {
                let secs = start.elapsed().as_secs_f64();
                let words = nmf_topic_words(&m, &vocab, top_n);
                let labels: Vec<i64> = m.dominant_topics().into_iter().map(|t| t as i64).collect();
                let meta = serde_json::json!({
                    "kind": kind.name(), "mode": mode, "subset": input.label, "k": k, "seed": seed,
                    "n_docs": matrix.n_docs(), "n_terms": matrix.n_terms(),
                    "relative_error": m.relative_error(&matrix),
                });
                let mats = [("w", m.w.clone()), ("h", m.h.clone())];
                (secs, words, labels, meta, mats, ("objective_trace", m.objective_trace.clone()))
            })
        };
        let Some((secs, words, labels, meta, mats, trace)) = fitted else {
            continue;
        };
        mkdir(&dir)?;
        let mut lines = vec![meta];
        for (name, rows) in &mats {
            lines.push(write_matrix(&dir, name, rows)?);
        }
        lines.push(serde_json::json!({"trace": trace.0, "values": trace.1}));
        lines.push(serde_json::json!({"uids": ref_docs.iter().map(|d| &d.uid).collect::<Vec<_>>()}));
        lines.push(serde_json::json!({"terms": vocab.terms()}));
        write_jsonl(&dir.join("meta.jsonl"), &lines)?;
        write_words_csv(&dir.join("topic_words.csv"), &words)?;
        let lists: Vec<Vec<String>> = words
            .iter()
            .map(|t| t.iter().map(|(w, _)| w.clone()).collect())
            .collect();
        let sizes = SizeDistribution::from_labels(&labels, k);
        let report = skip_or(
            evaluate_topics(
                kind.name(),
                input.label,
                k,
                &lists,
                &ref_docs,
                cfg.evaluation.window,
                cfg.evaluation.top_k,
                secs,
                sizes,
            ),
            &format!("scoring {what}"),
        )?;
        if let Some(r) = report {
            write_json(&dir.join("report.json"), &r)?;
            reports.push(r);
        }
    }
    Ok(reports)
}

fn dump_topic_model(dir: &Path, docs: &[TokenizedDocument], model: &TopicModel, trace: &TopicMergeTrace) -> Result<()> {
    mkdir(dir)?;
    write_labels_csv(&dir.join("labels.csv"), docs, model)?;
    model.write_sizes_csv(&dir.join("topic_sizes.csv"))?;
    model.write_words_csv(&dir.join("topic_words.csv"))?;
    model.write_json(&dir.join("topics.json"), Some(trace))
}

fn fit_cluster(cfg: &PipelineConfig, input: &SubsetInput<'_>, ks: &[usize]) -> Result<Vec<EvalReport>> {
    let settings = &cfg.cluster;
    if input.docs.len() <= settings.n_neighbors.max(settings.min_cluster_size) {
        log::warn!(
            "skipping cluster on {}: {} documents is too few",
            input.label,
            input.docs.len()
        );
        return Ok(Vec::new());
    }
    let seed = stage_seed(cfg.seed, &format!("cluster/{}", input.label));
    let start = Instant::now();
    let fit = fit_cluster_model(&input.docs, &input.vocab, &input.rows, settings, seed)?;
    let base_secs = start.elapsed().as_secs_f64();
    let base_dir = model_dir(cfg, ModelKind::Cluster, input.label).join("base");
    dump_topic_model(&base_dir, &input.docs, &fit.model, &fit.merges)?;
    write_matrix(&base_dir, "reduced", &fit.reduced.points)?;
    write_jsonl(
        &base_dir.join("meta.jsonl"),
        &[
            serde_json::json!({
                "kind": "cluster", "subset": input.label, "seed": seed, "n_docs": input.docs.len(),
                "n_topics": fit.model.n_topics(), "outliers": fit.model.topics[0].size,
            }),
            serde_json::json!({"settings": settings}),
            serde_json::json!({"matrix": "reduced", "file": "reduced.bin", "rows": fit.reduced.n(), "cols": fit.reduced.dim()}),
        ],
    )?;
    write_json(&base_dir.join("model.json"), &fit.model)?;

    let ctx = TopicContext {
        docs: &input.docs,
        vocab: &input.vocab,
        embeddings: &input.rows,
    };
    let mut reports = Vec::new();
    for &k in ks {
        let t = Instant::now();
        let (model, trace) = if fit.model.n_topics() > k {
            reduce_topics(&fit.model, k, &ctx)?
        } else {
            if fit.model.n_topics() < k {
                log::warn!(
                    "cluster on {}: {} topics found, fewer than the requested {k}",
                    input.label,
                    fit.model.n_topics()
                );
            }
            (fit.model.clone(), TopicMergeTrace::default())
        };
        let secs = base_secs + t.elapsed().as_secs_f64();
        let dir = model_dir(cfg, ModelKind::Cluster, input.label).join(format!("k{k}"));
        dump_topic_model(&dir, &input.docs, &model, &trace)?;
        if model.n_topics() == 0 {
            log::warn!("cluster on {}: no topics to score", input.label);
            continue;
        }
        let lists: Vec<Vec<String>> = model.keyword_lists();
        let sizes = SizeDistribution::from_labels(&model.labels.labels, model.n_topics());
        let what = format!("scoring cluster K={k} on {}", input.label);
        let report = skip_or(
            evaluate_topics(
                "cluster",
                input.label,
                k,
                &lists,
                &input.docs,
                cfg.evaluation.window,
                cfg.evaluation.top_k,
                secs,
                sizes,
            ),
            &what,
        )?;
        if let Some(r) = report {
            write_json(&dir.join("report.json"), &r)?;
            reports.push(r);
        }
    }
    Ok(reports)
}

/// Fits the configured models on every subset, dumps them and writes one
/// evaluation report per model, subset and topic count.
pub fn cmd_fit(cfg: &PipelineConfig, opts: &FitOptions) -> Result<(Vec<EvalReport>, RunManifest)> {
    cfg.validate()?;
    let mut run = Run::begin(cfg, "fit")?;
    let prepared = run.stage("load", || load_prepared(cfg))?;
    let rows = run.stage("embed", || document_embeddings(cfg, &prepared))?;
    let parts = run.stage("subsets", || subsets(cfg, &prepared))?;
    let models: Vec<ModelKind> = match opts.model {
        Some(m) => vec![m],
        None => cfg.models.enabled.clone(),
    };
    let ks: Vec<usize> = match opts.k {
        Some(0) => return Err(Error::Parameter("K must be >= 1".into())),
        Some(k) => vec![k],
        None => cfg.models.topic_counts.clone(),
    };
    let mut reports = Vec::new();
    for (label, idx) in &parts {
        let docs: Vec<TokenizedDocument> = idx.iter().map(|&i| prepared.docs[i].clone()).collect();
        let vocab = match skip_or(subset_vocab(cfg, &prepared, label, &docs), &format!("subset {label}"))? {
            Some(v) => v,
            None => continue,
        };
        let input = SubsetInput {
            label,
            rows: idx.iter().map(|&i| rows[i].clone()).collect(),
            docs,
            vocab,
        };
        for &m in &models {
            let r = run.stage(&format!("fit {m} {label}"), || match m {
                ModelKind::Cluster => fit_cluster(cfg, &input, &ks),
                _ => fit_classical(cfg, m, &input, prepared.entities.as_ref(), &ks),
            })?;
            reports.extend(r);
        }
    }
    Ok((reports, run.finish()?))
}

fn sorted_dirs(p: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(p)
        .map_err(|e| Error::io(p, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

/// Every persisted evaluation report, in table order.
pub fn collect_reports(cfg: &PipelineConfig) -> Result<Vec<EvalReport>> {
    let root = cfg.out_dir().join("models");
    let mut reports = Vec::new();
    if root.is_dir() {
        for model in sorted_dirs(&root)? {
            for subset in sorted_dirs(&model)? {
                for k in sorted_dirs(&subset)? {
                    let p = k.join("report.json");
                    if p.is_file() {
                        reports.push(read_json::<EvalReport>(&p)?);
                    }
                }
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::MissingModels(root));
    }
    let rank = |m: &str| ModelKind::ALL.iter().position(|k| k.name() == m).unwrap_or(usize::MAX);
    reports.sort_by(|a, b| {
        rank(&a.model)
            .cmp(&rank(&b.model))
            .then(a.model.cmp(&b.model))
            .then(a.n_topics.cmp(&b.n_topics))
            .then((a.subset != ALL_SUBSET).cmp(&(b.subset != ALL_SUBSET)))
            .then(a.subset.cmp(&b.subset))
    });
    Ok(reports)
}

/// Comparison table over all fitted models as CSV and Markdown.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<(ComparisonTable, RunManifest)> {
    let mut run = Run::begin(cfg, "evaluate")?;
    let table = run.stage("evaluate", || {
        let reports = collect_reports(cfg)?;
        let table = compare(&reports)?;
        let dir = cfg.out_dir().join("tables");
        mkdir(&dir)?;
        table.write(&dir.join("comparison.csv"), &dir.join("comparison.md"))?;
        write_json(&dir.join("reports.json"), &reports)?;
        Ok(table)
    })?;
    Ok((table, run.finish()?))
}

/// Topics per chart.
pub const TOPICS_PER_SVG: usize = 5;

fn base_model_path(cfg: &PipelineConfig) -> PathBuf {
    model_dir(cfg, ModelKind::Cluster, ALL_SUBSET).join("base").join("model.json")
}

/// Topics over time of the whole-corpus cluster model, as CSV, JSON and one
/// SVG chart per group of topics.
pub fn cmd_dynamic(cfg: &PipelineConfig) -> Result<(TopicsOverTime, RunManifest)> {
    let mut run = Run::begin(cfg, "dynamic")?;
    let tot = run.stage("dynamic", || {
        let prepared = load_prepared(cfg)?;
        let bins = load_bins(cfg)?;
        let path = base_model_path(cfg);
        if !path.is_file() {
            return Err(Error::MissingModels(path));
        }
        let model: TopicModel = read_json(&path)?;
        let tot = topics_over_time(&model, &prepared.docs, &prepared.vocab, &bins.bins, &cfg.dynamic)?;
        let dir = cfg.out_dir().join("dynamic");
        mkdir(&dir)?;
        tot.write_csv(&dir.join("topics_over_time.csv"))?;
        tot.write_json(&dir.join("topics_over_time.json"))?;
        let y_label = if cfg.dynamic.proportion { "share of documents" } else { "documents" };
        let ids: Vec<i64> = (0..model.n_topics() as i64).collect();
        for group in ids.chunks(TOPICS_PER_SVG) {
            let labelled: Vec<(i64, String)> = group
                .iter()
                .map(|&t| {
                    let kw: Vec<&str> = model.topic(t).keywords.iter().take(3).map(String::as_str).collect();
                    (t, format!("{t}: {}", kw.join(" ")))
                })
                .collect();
            let name = format!("topics_{:02}-{:02}.svg", group[0], group[group.len() - 1]);
            let p = dir.join(name);
            fs::write(&p, svg::evolution_svg(&tot, &labelled, y_label)).map_err(|e| Error::io(&p, e))?;
        }
        Ok(tot)
    })?;
    Ok((tot, run.finish()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: Params,
    pub best_loss: f64,
    pub trials: Trials,
}

/// `[cluster]` fragment the fit command accepts through `--params`.
pub fn params_fragment(best: &Params) -> Result<String> {
    let mut cluster = toml::Table::new();
    for (k, v) in best {
        let value = match v {
            ParamValue::Int(i) => toml::Value::Integer(*i),
            ParamValue::Float(f) => toml::Value::Float(*f),
            ParamValue::Choice(s) => toml::Value::String(s.clone()),
        };
        cluster.insert(k.clone(), value);
    }
    let mut root = toml::Table::new();
    root.insert("cluster".into(), toml::Value::Table(cluster));
    toml::to_string(&root).map_err(|e| Error::Format(e.to_string()))
}

/// Runs the TPE search over the cluster model's parameters on the whole
/// corpus. The trials file under `tune/` is resumed when present.
pub fn cmd_tune(cfg: &PipelineConfig, max_evals: Option<usize>) -> Result<(TuneOutcome, RunManifest)> {
    cfg.validate()?;
    let space = cfg.hpo.search_space();
    if let Some(bad) = space.params.keys().find(|n| !TUNED_PARAMS.contains(&n.as_str())) {
        return Err(Error::Validation(format!("search space parameter '{bad}' is not tunable")));
    }
    let mut run = Run::begin(cfg, "tune")?;
    let prepared = run.stage("load", || load_prepared(cfg))?;
    let rows = run.stage("embed", || document_embeddings(cfg, &prepared))?;
    let dir = cfg.out_dir().join("tune");
    mkdir(&dir)?;
    let mut opts = FminOptions::new(max_evals.unwrap_or(cfg.hpo.max_evals), cfg.seed);
    opts.tpe = cfg.hpo.tpe();
    opts.trials_path = Some(dir.join("trials.jsonl"));
    let weights = QualityWeights {
        w_tc: cfg.hpo.w_tc,
        w_td: cfg.hpo.w_td,
        window: cfg.evaluation.window,
        top_k: cfg.evaluation.top_k,
    };
    let seed = stage_seed(cfg.seed, &format!("cluster/{ALL_SUBSET}"));
    let (best, trials) = run.stage("search", || {
        fmin(
            |p| objective_topic_quality(p, &prepared.docs, &prepared.vocab, &rows, &cfg.cluster, &weights, seed),
            &space,
            &opts,
        )
    })?;
    let best_loss = trials.best().and_then(|t| t.loss).unwrap_or(f64::INFINITY);
    let fragment = params_fragment(&best)?;
    let p = dir.join("best_params.toml");
    fs::write(&p, &fragment).map_err(|e| Error::io(&p, e))?;
    write_json(
        &dir.join("best.json"),
        &serde_json::json!({"params": best, "loss": best_loss, "index": trials.best_index()}),
    )?;
    let outcome = TuneOutcome {
        best,
        best_loss,
        trials,
    };
    Ok((outcome, run.finish()?))
}

fn rel_files(root: &Path, sub: &str, ext: &[&str]) -> Vec<(String, String)> {
    let dir = root.join(sub);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| ext.iter().any(|x| n.ends_with(x)))
        .map(|n| (n.clone(), format!("{sub}/{n}")))
        .collect();
    out.sort();
    out
}

/// HTML index over tables, charts and tuning results.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<(PathBuf, RunManifest)> {
    let mut run = Run::begin(cfg, "report")?;
    let path = run.stage("report", || {
        let out = cfg.out_dir();
        let tables = rel_files(&out, "tables", &[".md", ".csv"]);
        if tables.is_empty() {
            return Err(Error::MissingModels(out.join("tables")));
        }
        let sections = vec![
            ("Comparison tables".to_string(), tables),
            ("Topics over time".to_string(), rel_files(&out, "dynamic", &[".svg", ".csv"])),
            ("Tuning".to_string(), rel_files(&out, "tune", &[".toml", ".json", ".jsonl"])),
            ("Run manifests".to_string(), rel_files(&out, "manifests", &[".json"])),
        ];
        let p = out.join("index.html");
        fs::write(&p, svg::index_html("Topic modeling report", &sections)).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    })?;
    Ok((path, run.finish()?))
}
