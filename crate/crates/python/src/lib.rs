//! Python bindings: corpus preparation, the classical and cluster topic
//! models, metrics, TPE search and the config-driven pipeline commands.
//!
//! Documents cross the boundary as token lists, matrices as lists of rows
//! and structured results as plain dicts.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyList, PyString};

use chronotopic::classical::{self, InputMode, LdaParams, NmfParams, WeightedDocTermMatrix};
use chronotopic::cluster::{fit_cluster_model, ClusterSettings};
use chronotopic::corpus::{self, Corpus, Document, Preprocessor, TimeBins, TokenizedDocument, Vocabulary};
use chronotopic::dynamic::{topics_over_time, DynamicParams};
use chronotopic::embedding::{self, knn_rows, Metric};
use chronotopic::evaluation;
use chronotopic::hpo::{self, FminOptions, ParamValue, Params, SearchSpace};
use chronotopic::manifold::{self, fit_curve, fuzzy_graph, ReduceParams, Selection};
use chronotopic::pipeline::{self, FitOptions, ModelKind, PipelineConfig};
use chronotopic::topics::{self, TopicContext};
use chronotopic::Error;

create_exception!(chronotopic_py, ChronotopicError, PyException, "Raised for any library error; args are (message, exit_code).");

fn err(e: Error) -> PyErr {
    let code = e.exit_code();
    ChronotopicError::new_err((e.to_string(), code))
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn py_to_json(v: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    use serde_json::Value;
    if v.is_none() {
        Ok(Value::Null)
    } else if v.is_instance_of::<PyBool>() {
        Ok(Value::Bool(v.extract()?))
    } else if v.is_instance_of::<PyInt>() {
        Ok(Value::from(v.extract::<i64>()?))
    } else if v.is_instance_of::<PyFloat>() {
        Ok(serde_json::Number::from_f64(v.extract()?).map_or(Value::Null, Value::Number))
    } else if v.is_instance_of::<PyString>() {
        Ok(Value::String(v.extract()?))
    } else if let Ok(d) = v.cast::<PyDict>() {
        let mut m = serde_json::Map::new();
        for (k, x) in d.iter() {
            m.insert(k.extract::<String>()?, py_to_json(&x)?);
        }
        Ok(Value::Object(m))
    } else {
        let items: Vec<Bound<'_, PyAny>> = v.try_iter()?.collect::<PyResult<_>>()?;
        Ok(Value::Array(items.iter().map(py_to_json).collect::<PyResult<_>>()?))
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| err(Error::Format(e.to_string())))?;
    json_to_py(py, &v)
}

fn from_py<T: serde::de::DeserializeOwned>(v: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    serde_json::from_value(py_to_json(v)?).map_err(|e| err(Error::Validation(format!("{what}: {e}"))))
}

fn documents(tokens: Vec<Vec<String>>, years: Option<Vec<i32>>) -> PyResult<Vec<TokenizedDocument>> {
    if let Some(y) = &years {
        if y.len() != tokens.len() {
            return Err(err(Error::Validation(format!("{} years for {} documents", y.len(), tokens.len()))));
        }
    }
    Ok(tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| TokenizedDocument::new(format!("d{i}"), years.as_ref().map_or(2000, |y| y[i]), t))
        .collect())
}

/// Vocabulary over every token that occurs.
fn full_vocab(docs: &[TokenizedDocument]) -> Vocabulary {
    let mut terms: Vec<&str> = docs.iter().flat_map(|d| d.tokens.iter().map(String::as_str)).collect();
    terms.sort_unstable();
    terms.dedup();
    Vocabulary::from_terms(terms, docs)
}

fn metric(name: &str) -> PyResult<Metric> {
    match name {
        "cosine" => Ok(Metric::Cosine),
        "euclidean" => Ok(Metric::Euclidean),
        _ => Err(err(Error::Parameter(format!("unknown metric '{name}'")))),
    }
}

fn selection(name: &str) -> PyResult<Selection> {
    match name {
        "eom" => Ok(Selection::Eom),
        "leaf" => Ok(Selection::Leaf),
        _ => Err(err(Error::Parameter(format!("unknown cluster selection '{name}'")))),
    }
}

/// Cleans and tokenizes raw texts. Returns `(tokens, retained)` per text;
/// texts shorter than `min_tokens` are kept but flagged.
#[pyfunction]
#[pyo3(signature = (texts, years=None, min_tokens=20))]
fn preprocess(texts: Vec<String>, years: Option<Vec<i32>>, min_tokens: usize) -> PyResult<Vec<(Vec<String>, bool)>> {
    let n = texts.len();
    let years = years.unwrap_or_else(|| vec![2000; n]);
    if years.len() != n {
        return Err(err(Error::Validation(format!("{} years for {n} texts", years.len()))));
    }
    let docs = texts
        .into_iter()
        .zip(years)
        .enumerate()
        .map(|(i, (text, year))| Document {
            uid: format!("d{i}"),
            text,
            year,
        })
        .collect();
    let pre = Preprocessor {
        min_tokens,
        ..Preprocessor::default()
    };
    let out = pre.run(&Corpus::new(docs).map_err(err)?).map_err(err)?;
    Ok(out.into_iter().map(|d| (d.tokens, d.retained)).collect())
}

/// Terms kept after document-frequency pruning, sorted.
#[pyfunction]
#[pyo3(signature = (tokens, min_df=3, max_df_ratio=0.95))]
fn build_vocabulary(tokens: Vec<Vec<String>>, min_df: usize, max_df_ratio: f64) -> PyResult<Vec<String>> {
    let docs = documents(tokens, None)?;
    Ok(corpus::build_vocabulary(&docs, min_df, max_df_ratio).map_err(err)?.terms().to_vec())
}

/// Deterministic hashed TF-IDF document vectors, L2-normalized.
#[pyfunction]
#[pyo3(signature = (tokens, dim=256, seed=0))]
fn hash_embed(tokens: Vec<Vec<String>>, dim: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let docs = documents(tokens, None)?;
    let m = embedding::hash_embed(&docs, &full_vocab(&docs), dim, seed).map_err(err)?;
    Ok((0..m.n()).map(|i| m.row_f64(i)).collect())
}

fn matrix(docs: &[TokenizedDocument], vocab: &Vocabulary, tfidf: bool) -> PyResult<WeightedDocTermMatrix> {
    let bow = WeightedDocTermMatrix::from_documents(docs, vocab, InputMode::Bow);
    if tfidf {
        classical::tfidf_transform(&bow).map_err(err)
    } else {
        Ok(bow)
    }
}

/// Batch variational LDA. Returns `topic_words`, `topic_word`, `doc_topic`
/// and `bound_trace`.
#[pyfunction]
#[pyo3(signature = (tokens, k, seed=0, tfidf=false, epochs=None, top_n=10))]
fn fit_lda<'py>(
    py: Python<'py>,
    tokens: Vec<Vec<String>>,
    k: usize,
    seed: u64,
    tfidf: bool,
    epochs: Option<usize>,
    top_n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let docs = documents(tokens, None)?;
    let vocab = full_vocab(&docs);
    let m = matrix(&docs, &vocab, tfidf)?;
    let mut p = LdaParams::new(k, seed);
    if let Some(e) = epochs {
        p.epochs = e;
    }
    let model = py.detach(|| classical::fit_lda(&m, &p)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("topic_words", classical::lda_topic_words(&model, &vocab, top_n))?;
    d.set_item("topic_word", model.topic_distributions())?;
    d.set_item("doc_topic", &model.doc_topic)?;
    d.set_item("bound_trace", &model.bound_trace)?;
    Ok(d)
}

/// Frobenius NMF by multiplicative updates. Returns `topic_words`, `w`, `h`
/// and `objective_trace`.
#[pyfunction]
#[pyo3(signature = (tokens, k, seed=0, tfidf=false, iters=None, top_n=10))]
fn fit_nmf<'py>(
    py: Python<'py>,
    tokens: Vec<Vec<String>>,
    k: usize,
    seed: u64,
    tfidf: bool,
    iters: Option<usize>,
    top_n: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let docs = documents(tokens, None)?;
    let vocab = full_vocab(&docs);
    let m = matrix(&docs, &vocab, tfidf)?;
    let mut p = NmfParams::new(k, seed);
    if let Some(i) = iters {
        p.iters = i;
    }
    let model = py.detach(|| classical::fit_nmf(&m, &p)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("topic_words", classical::nmf_topic_words(&model, &vocab, top_n))?;
    d.set_item("w", &model.w)?;
    d.set_item("h", &model.h)?;
    d.set_item("objective_trace", &model.objective_trace)?;
    Ok(d)
}

/// Density clustering; returns `(labels, strengths)` with -1 for noise.
#[pyfunction]
#[pyo3(signature = (points, min_cluster_size=15, min_samples=None, selection="eom"))]
fn hdbscan(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    min_cluster_size: usize,
    min_samples: Option<usize>,
    selection: &str,
) -> PyResult<(Vec<i64>, Vec<f64>)> {
    let sel = self::selection(selection)?;
    let out = py
        .detach(|| manifold::hdbscan(&points, min_cluster_size, min_samples, sel))
        .map_err(err)?;
    Ok((out.labels, out.strengths))
}

/// Neighbor-graph layout into `n_components` dimensions.
#[pyfunction]
#[pyo3(signature = (points, n_neighbors=15, n_components=5, min_dist=0.0, spread=1.0, metric="cosine", epochs=200, seed=0))]
#[allow(clippy::too_many_arguments)]
fn reduce(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    n_neighbors: usize,
    n_components: usize,
    min_dist: f64,
    spread: f64,
    metric: &str,
    epochs: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let m = self::metric(metric)?;
    py.detach(|| {
        let graph = fuzzy_graph(&knn_rows(&points, n_neighbors, m)?)?;
        let curve = fit_curve(min_dist, spread)?;
        let mut p = ReduceParams::new(n_components, curve.a, curve.b, seed);
        p.epochs = epochs;
        Ok(manifold::reduce(&graph, &points, &p)?.points)
    })
    .map_err(err)
}

/// Class-based TF-IDF. Returns `(terms, rows)`; row 0 is the outlier class.
#[pyfunction]
fn ctfidf(labels: Vec<i64>, tokens: Vec<Vec<String>>) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let docs = documents(tokens, None)?;
    let vocab = full_vocab(&docs);
    let m = topics::ctfidf(&labels, &docs, &vocab).map_err(err)?;
    Ok((vocab.terms().to_vec(), m.rows))
}

/// Mean NPMI over topics from boolean sliding windows.
#[pyfunction]
#[pyo3(signature = (topics, tokens, window=10))]
fn npmi_coherence(topics: Vec<Vec<String>>, tokens: Vec<Vec<String>>, window: usize) -> PyResult<f64> {
    let docs = documents(tokens, None)?;
    evaluation::npmi_coherence(&topics, &docs, window).map_err(err)
}

/// Unique terms over all `K * k` slots.
#[pyfunction]
#[pyo3(signature = (topics, k=10))]
fn topic_diversity(topics: Vec<Vec<String>>, k: usize) -> PyResult<f64> {
    evaluation::topic_diversity(&topics, k).map_err(err)
}

/// A fitted embedding-cluster topic model together with the documents and
/// embeddings it was built on.
#[pyclass(name = "TopicModel", module = "chronotopic_py")]
struct PyTopicModel {
    model: topics::TopicModel,
    docs: Vec<TokenizedDocument>,
    vocab: Vocabulary,
    embeddings: Vec<Vec<f64>>,
}

impl PyTopicModel {
    fn ctx(&self) -> TopicContext<'_> {
        TopicContext {
            docs: &self.docs,
            vocab: &self.vocab,
            embeddings: &self.embeddings,
        }
    }
}

#[pymethods]
impl PyTopicModel {
    /// Non-outlier topic count.
    #[getter]
    fn n_topics(&self) -> usize {
        self.model.n_topics()
    }

    #[getter]
    fn labels(&self) -> Vec<i64> {
        self.model.labels.labels.clone()
    }

    /// Outlier count first, then one size per topic.
    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.model.sizes()
    }

    /// MMR keywords per non-outlier topic.
    fn keywords(&self) -> Vec<Vec<String>> {
        self.model.keyword_lists()
    }

    /// `(term, score)` c-TF-IDF ranking of one topic; -1 is the outlier class.
    fn top_words(&self, topic: i64) -> PyResult<Vec<(String, f64)>> {
        if topic < -1 || topic >= self.model.n_topics() as i64 {
            return Err(err(Error::Parameter(format!("no topic {topic}"))));
        }
        Ok(self.model.topic(topic).top_words.clone())
    }

    /// Merges the closest topics until `k` remain.
    fn reduce(&self, py: Python<'_>, k: usize) -> PyResult<PyTopicModel> {
        let (model, _) = py.detach(|| topics::reduce_topics(&self.model, k, &self.ctx())).map_err(err)?;
        Ok(PyTopicModel {
            model,
            docs: self.docs.clone(),
            vocab: self.vocab.clone(),
            embeddings: self.embeddings.clone(),
        })
    }

    /// NPMI and diversity of the keyword lists.
    #[pyo3(signature = (window=10, top_k=10))]
    fn scores(&self, window: usize, top_k: usize) -> PyResult<(f64, f64)> {
        let lists = self.model.keyword_lists();
        let tc = evaluation::npmi_coherence(&lists, &self.docs, window).map_err(err)?;
        let td = evaluation::topic_diversity(&lists, top_k).map_err(err)?;
        Ok((tc, td))
    }

    /// Per-topic, per-bin counts and bin-local top words. `bins` are
    /// inclusive `(start, end)` year ranges.
    #[pyo3(signature = (bins, proportion=false, global_tuning=false, evolution_tuning=false))]
    fn topics_over_time<'py>(
        &self,
        py: Python<'py>,
        bins: Vec<(i32, i32)>,
        proportion: bool,
        global_tuning: bool,
        evolution_tuning: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let bins = TimeBins::new(bins.into_iter().map(|(a, b)| [a, b]).collect()).map_err(err)?;
        let params = DynamicParams {
            global_tuning,
            evolution_tuning,
            proportion,
        };
        let tot = topics_over_time(&self.model, &self.docs, &self.vocab, &bins, &params).map_err(err)?;
        to_py(py, &tot.rows)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.model).map_err(|e| err(Error::Format(e.to_string())))
    }

    fn __repr__(&self) -> String {
        format!(
            "TopicModel(n_topics={}, documents={}, outliers={})",
            self.model.n_topics(),
            self.docs.len(),
            self.model.topics[0].size
        )
    }
}

/// Neighbor graph, layout, density clustering and c-TF-IDF topics.
/// `settings` takes the `[cluster]` config keys, e.g. `n_neighbors`.
#[pyfunction]
#[pyo3(signature = (tokens, embeddings, years=None, seed=0, settings=None))]
fn fit_cluster(
    py: Python<'_>,
    tokens: Vec<Vec<String>>,
    embeddings: Vec<Vec<f64>>,
    years: Option<Vec<i32>>,
    seed: u64,
    settings: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyTopicModel> {
    let settings: ClusterSettings = match settings {
        Some(s) => from_py(s.as_any(), "cluster settings")?,
        None => ClusterSettings::default(),
    };
    let docs = documents(tokens, years)?;
    let vocab = full_vocab(&docs);
    let fit = py
        .detach(|| fit_cluster_model(&docs, &vocab, &embeddings, &settings, seed))
        .map_err(err)?;
    Ok(PyTopicModel {
        model: fit.model,
        docs,
        vocab,
        embeddings,
    })
}

fn params_to_py<'py>(py: Python<'py>, p: &Params) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in p {
        match v {
            ParamValue::Int(i) => d.set_item(k, i)?,
            ParamValue::Float(f) => d.set_item(k, f)?,
            ParamValue::Choice(s) => d.set_item(k, s)?,
        }
    }
    Ok(d)
}

/// TPE minimization of `objective(params) -> float`. `space` follows the
/// config form, e.g. `{"params": {"x": {"kind": "uniform", "lo": -5, "hi": 5}}}`.
/// Exceptions and non-finite losses mark a trial failed. Returns
/// `(best_params, trials)`.
#[pyfunction]
#[pyo3(signature = (objective, space, max_evals, seed=0, trials_path=None))]
fn fmin<'py>(
    py: Python<'py>,
    objective: Bound<'py, PyAny>,
    space: &Bound<'py, PyDict>,
    max_evals: usize,
    seed: u64,
    trials_path: Option<PathBuf>,
) -> PyResult<(Bound<'py, PyDict>, Bound<'py, PyAny>)> {
    let space: SearchSpace = from_py(space.as_any(), "search space")?;
    space.validate().map_err(err)?;
    let mut opts = FminOptions::new(max_evals, seed);
    opts.trials_path = trials_path;
    let call = |p: &Params| -> chronotopic::Result<f64> {
        let args = params_to_py(py, p).map_err(|e| Error::Domain(e.to_string()))?;
        objective
            .call1((args,))
            .and_then(|r| r.extract::<f64>())
            .map_err(|e| Error::Domain(format!("objective raised: {e}")))
    };
    let (best, trials) = hpo::fmin(call, &space, &opts).map_err(err)?;
    Ok((params_to_py(py, &best)?, to_py(py, &trials.trials)?))
}

fn config(path: PathBuf, output_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&path).map_err(err)?;
    if let Some(o) = output_dir {
        cfg.output_dir = std::path::absolute(&o).map_err(|e| err(Error::io(&o, e)))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Runs the prepare command; returns its summary.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None, seed=None))]
fn prepare(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<Bound<'_, PyAny>> {
    let cfg = self::config(config, output_dir, seed)?;
    let (summary, _) = py.detach(|| pipeline::cmd_prepare(&cfg)).map_err(err)?;
    to_py(py, &summary)
}

/// Runs the fit command; returns one report dict per model, subset and K.
#[pyfunction]
#[pyo3(signature = (config, model=None, k=None, params=None, output_dir=None, seed=None))]
fn fit<'py>(
    py: Python<'py>,
    config: PathBuf,
    model: Option<&str>,
    k: Option<usize>,
    params: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = self::config(config, output_dir, seed)?;
    if let Some(p) = params {
        cfg.apply_params_file(&p).map_err(err)?;
    }
    let model = model
        .map(|m| m.parse::<ModelKind>())
        .transpose()
        .map_err(|e| err(Error::Parameter(e.to_string())))?;
    let opts = FitOptions { model, k };
    let (reports, _) = py.detach(|| pipeline::cmd_fit(&cfg, &opts)).map_err(err)?;
    to_py(py, &reports)
}

/// Runs the evaluate command; returns the Markdown table.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn evaluate(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<String> {
    let cfg = self::config(config, output_dir, None)?;
    let (table, _) = py.detach(|| pipeline::cmd_evaluate(&cfg)).map_err(err)?;
    Ok(table.to_markdown())
}

/// Runs the dynamic command; returns the topics-over-time rows.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn dynamic(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Bound<'_, PyAny>> {
    let cfg = self::config(config, output_dir, None)?;
    let (tot, _) = py.detach(|| pipeline::cmd_dynamic(&cfg)).map_err(err)?;
    to_py(py, &tot.rows)
}

/// Runs the tune command; returns `(best_params, best_loss, n_trials)`.
#[pyfunction]
#[pyo3(signature = (config, max_evals=None, output_dir=None, seed=None))]
fn tune(
    py: Python<'_>,
    config: PathBuf,
    max_evals: Option<usize>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> PyResult<(Bound<'_, PyDict>, f64, usize)> {
    let cfg = self::config(config, output_dir, seed)?;
    let (o, _) = py.detach(|| pipeline::cmd_tune(&cfg, max_evals)).map_err(err)?;
    Ok((params_to_py(py, &o.best)?, o.best_loss, o.trials.len()))
}

/// Runs the report command; returns the index page path.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn report(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<PathBuf> {
    let cfg = self::config(config, output_dir, None)?;
    let (p, _) = py.detach(|| pipeline::cmd_report(&cfg)).map_err(err)?;
    Ok(p)
}

#[pymodule]
pub fn chronotopic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ChronotopicError", m.py().get_type::<ChronotopicError>())?;
    m.add_class::<PyTopicModel>()?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(build_vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lda, m)?)?;
    m.add_function(wrap_pyfunction!(fit_nmf, m)?)?;
    m.add_function(wrap_pyfunction!(hdbscan, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(ctfidf, m)?)?;
    m.add_function(wrap_pyfunction!(npmi_coherence, m)?)?;
    m.add_function(wrap_pyfunction!(topic_diversity, m)?)?;
    m.add_function(wrap_pyfunction!(fit_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(fmin, m)?)?;
    m.add_function(wrap_pyfunction!(prepare, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(dynamic, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
