//! Pipeline configuration file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::InputMode;
use crate::cluster::ClusterSettings;
use crate::corpus::{CorpusFormat, FilterStage, TimeBins};
use crate::dynamic::DynamicParams;
use crate::error::{Error, Result};
use crate::hpo::{SearchSpace, TpeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lda")]
    Lda,
    #[serde(rename = "lda-tfidf")]
    LdaTfidf,
    #[serde(rename = "lda-ner")]
    LdaNer,
    #[serde(rename = "nmf")]
    Nmf,
    #[serde(rename = "nmf-tfidf")]
    NmfTfidf,
    #[serde(rename = "nmf-ner")]
    NmfNer,
    #[serde(rename = "cluster")]
    Cluster,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Lda,
        ModelKind::LdaTfidf,
        ModelKind::LdaNer,
        ModelKind::Nmf,
        ModelKind::NmfTfidf,
        ModelKind::NmfNer,
        ModelKind::Cluster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::LdaTfidf => "lda-tfidf",
            ModelKind::LdaNer => "lda-ner",
            ModelKind::Nmf => "nmf",
            ModelKind::NmfTfidf => "nmf-tfidf",
            ModelKind::NmfNer => "nmf-ner",
            ModelKind::Cluster => "cluster",
        }
    }

    /// Input representation of a classical model; `None` for the cluster model.
    pub fn input_mode(self) -> Option<InputMode> {
        match self {
            ModelKind::Lda | ModelKind::Nmf => Some(InputMode::Bow),
            ModelKind::LdaTfidf | ModelKind::NmfTfidf => Some(InputMode::Tfidf),
            ModelKind::LdaNer | ModelKind::NmfNer => Some(InputMode::Entity),
            ModelKind::Cluster => None,
        }
    }

    pub fn is_lda(self) -> bool {
        matches!(self, ModelKind::Lda | ModelKind::LdaTfidf | ModelKind::LdaNer)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub format: Option<CorpusFormat>,
    pub entities: Option<PathBuf>,
    /// Replaces the bundled English list.
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub min_tokens: usize,
    pub filter_stage: FilterStage,
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub entity_min_df: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            path: PathBuf::from("corpus.jsonl"),
            format: None,
            entities: None,
            stopwords: None,
            lemmas: None,
            min_tokens: 20,
            filter_stage: FilterStage::BeforeStopwords,
            min_df: 3,
            max_df_ratio: 0.95,
            entity_min_df: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub bins: TimeBins,
    /// Fit and score every model on each bin as well as on the whole corpus.
    pub per_bin: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            bins: TimeBins::default_periods(),
            per_bin: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    File,
    Hash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub source: EmbeddingSource,
    pub vectors: PathBuf,
    pub index: PathBuf,
    /// Dimension of hash embeddings.
    pub dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            source: EmbeddingSource::File,
            vectors: PathBuf::from("embeddings.bin"),
            index: PathBuf::from("embeddings.index.jsonl"),
            dim: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub enabled: Vec<ModelKind>,
    pub topic_counts: Vec<usize>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            enabled: ModelKind::ALL.to_vec(),
            topic_counts: vec![10, 20, 30, 40, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub epochs: usize,
    pub tol: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            alpha: None,
            eta: None,
            epochs: 50,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfConfig {
    pub iters: usize,
    pub inner: usize,
    pub tol: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            iters: 500,
            inner: 10,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub window: usize,
    pub top_k: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            window: crate::evaluation::DEFAULT_WINDOW,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoConfig {
    pub max_evals: usize,
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub w_tc: f64,
    pub w_td: f64,
    pub space: Option<SearchSpace>,
}

impl Default for HpoConfig {
    fn default() -> Self {
        let tpe = TpeParams::default();
        HpoConfig {
            max_evals: 50,
            gamma: tpe.gamma,
            n_startup: tpe.n_startup,
            n_candidates: tpe.n_candidates,
            w_tc: 1.0,
            w_td: 1.0,
            space: None,
        }
    }
}

impl HpoConfig {
    pub fn tpe(&self) -> TpeParams {
        TpeParams {
            gamma: self.gamma,
            n_startup: self.n_startup,
            n_candidates: self.n_candidates,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(SearchSpace::default_topic_space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub time: TimeConfig,
    pub embeddings: EmbeddingConfig,
    pub models: ModelsConfig,
    pub lda: LdaConfig,
    pub nmf: NmfConfig,
    pub cluster: ClusterSettings,
    pub evaluation: EvaluationConfig,
    pub dynamic: DynamicParams,
    pub hpo: HpoConfig,
    /// Directory relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// SHA-256 of the configuration text.
    #[serde(skip)]
    pub hash: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            output_dir: PathBuf::from("output"),
            corpus: CorpusConfig::default(),
            time: TimeConfig::default(),
            embeddings: EmbeddingConfig::default(),
            models: ModelsConfig::default(),
            lda: LdaConfig::default(),
            nmf: NmfConfig::default(),
            cluster: ClusterSettings::default(),
            evaluation: EvaluationConfig::default(),
            dynamic: DynamicParams::default(),
            hpo: HpoConfig::default(),
            base_dir: PathBuf::from("."),
            hash: String::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |r| text[..r.start.min(text.len())].matches('\n').count() + 1);
    Error::parse(path, line, e.message())
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| toml_error(Path::new("<config>"), text, e))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.hash = sha256_hex(text.as_bytes());
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
        cfg.base_dir = path
            .parent()
            .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
            .unwrap_or(Path::new("."))
            .to_path_buf();
        cfg.hash = sha256_hex(text.as_bytes());
        Ok(cfg)
    }

    /// Overlays the `[cluster]` table of a tuned-parameters file.
    pub fn apply_params_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let overlay: toml::Table = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
        let Some(toml::Value::Table(patch)) = overlay.get("cluster") else {
            return Err(Error::parse(path, 0, "expected a [cluster] table"));
        };
        let mut current = toml::Table::try_from(&self.cluster).map_err(|e| Error::Format(e.to_string()))?;
        for (k, v) in patch {
            current.insert(k.clone(), v.clone());
        }
        self.cluster = current.try_into().map_err(|e: toml::de::Error| Error::parse(path, 0, e.message()))?;
        self.hash = sha256_hex(format!("{}\n{text}", self.hash).as_bytes());
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Checks value ranges and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let mut files = vec![self.resolve(&self.corpus.path)];
        files.extend(
            [&self.corpus.entities, &self.corpus.stopwords, &self.corpus.lemmas]
                .into_iter()
                .flatten()
                .map(|p| self.resolve(p)),
        );
        if self.embeddings.source == EmbeddingSource::File {
            files.push(self.resolve(&self.embeddings.vectors));
            files.push(self.resolve(&self.embeddings.index));
        }
        for f in files {
            if !f.is_file() {
                return Err(Error::Validation(format!("{}: file not found", f.display())));
            }
        }
        let counts = &self.models.topic_counts;
        if counts.is_empty() || counts.contains(&0) || counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "topic counts must be positive and strictly ascending, got {counts:?}"
            )));
        }
        if self.models.enabled.is_empty() {
            return Err(Error::Validation("no models enabled".into()));
        }
        let unique: BTreeSet<_> = self.models.enabled.iter().collect();
        if unique.len() != self.models.enabled.len() {
            return Err(Error::Validation("a model is enabled twice".into()));
        }
        let needs_entities = self.models.enabled.iter().any(|m| m.input_mode() == Some(InputMode::Entity));
        if needs_entities && self.corpus.entities.is_none() {
            return Err(Error::Validation("entity models need corpus.entities".into()));
        }
        if self.embeddings.source == EmbeddingSource::Hash && self.embeddings.dim < 8 {
            return Err(Error::Validation("hash embedding dim must be >= 8".into()));
        }
        if self.evaluation.top_k == 0 || self.evaluation.window == 0 {
            return Err(Error::Validation("evaluation window and top_k must be >= 1".into()));
        }
        self.hpo.search_space().validate()?;
        Ok(())
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        self.corpus
            .format
            .unwrap_or_else(|| CorpusFormat::from_path(&self.corpus.path))
    }
}
