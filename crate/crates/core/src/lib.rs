// NaN-rejecting `!(x >= 0.0)` checks are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classical;
pub mod cluster;
pub mod corpus;
pub mod dynamic;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod fixture;
pub mod hpo;
pub mod manifold;
pub mod pipeline;
pub mod rank;
pub mod topics;

pub use error::{Error, Result};
