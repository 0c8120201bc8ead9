//! The embedding-cluster topic model: neighbor graph, low-dimensional
//! layout, density clustering and c-TF-IDF topics.

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenizedDocument, Vocabulary};
use crate::embedding::{knn_rows, Metric};
use crate::error::{Error, Result};
use crate::manifold::{fit_curve, fuzzy_graph, hdbscan, reduce, ReduceParams, ReducedEmbedding, Selection};
use crate::topics::{build_topic_model, merge_small_topics, TopicContext, TopicMergeTrace, TopicModel, TopicParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub n_neighbors: usize,
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub metric: Metric,
    pub epochs: usize,
    pub min_cluster_size: usize,
    pub min_samples: Option<usize>,
    pub selection: Selection,
    /// Topics smaller than this are merged into their nearest neighbor.
    pub min_topic_size: Option<usize>,
    pub parallel_layout: bool,
    pub topic: TopicParams,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            n_neighbors: 15,
            n_components: 5,
            min_dist: 0.0,
            spread: 1.0,
            metric: Metric::Cosine,
            epochs: 200,
            min_cluster_size: 15,
            min_samples: None,
            selection: Selection::Eom,
            min_topic_size: None,
            parallel_layout: false,
            topic: TopicParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub reduced: ReducedEmbedding,
    pub model: TopicModel,
    /// Merges applied by `min_topic_size`.
    pub merges: TopicMergeTrace,
}

pub fn fit_cluster_model(
    docs: &[TokenizedDocument],
    vocab: &Vocabulary,
    embeddings: &[Vec<f64>],
    settings: &ClusterSettings,
    seed: u64,
) -> Result<ClusterFit> {
    if docs.len() != embeddings.len() {
        return Err(Error::Validation(format!(
            "{} documents but {} embedding rows",
            docs.len(),
            embeddings.len()
        )));
    }
    let nbrs = knn_rows(embeddings, settings.n_neighbors, settings.metric)?;
    let graph = fuzzy_graph(&nbrs)?;
    let curve = fit_curve(settings.min_dist, settings.spread)?;
    let mut rp = ReduceParams::new(settings.n_components, curve.a, curve.b, seed);
    rp.epochs = settings.epochs;
    rp.parallel = settings.parallel_layout;
    let reduced = reduce(&graph, embeddings, &rp)?;
    let labels = hdbscan(
        &reduced.points,
        settings.min_cluster_size,
        settings.min_samples,
        settings.selection,
    )?;
    let ctx = TopicContext {
        docs,
        vocab,
        embeddings,
    };
    let model = build_topic_model(labels, &ctx, &settings.topic)?;
    let (model, merges) = match settings.min_topic_size {
        Some(m) if m > 1 => merge_small_topics(&model, m, &ctx)?,
        _ => (model, TopicMergeTrace::default()),
    };
    log::info!(
        "{} topics, {} outliers of {} documents",
        model.n_topics(),
        model.topics[0].size,
        docs.len()
    );
    Ok(ClusterFit {
        reduced,
        model,
        merges,
    })
}
