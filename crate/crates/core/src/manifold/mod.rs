//! Neighbor-graph reduction and density clustering of document embeddings.

mod curve;
mod fuzzy;
mod hdbscan;
mod layout;

pub use curve::{fit_curve, CurveFit};
pub use fuzzy::{fuzzy_graph, FuzzyGraph, SMOOTH_K_ITERS};
pub use hdbscan::{core_distances, hdbscan, mutual_reachability_mst, ClusterLabels, Selection};
pub use layout::{pca_init, reduce, ReduceParams, ReducedEmbedding};
