//! Path naturalness over commonsense knowledge graphs.
//!
//! Relational paths are featurized, scored by a recurrent model trained on
//! pairwise human judgments, and used to select paths for coherence,
//! retrieval, and analogy tasks.

pub mod baselines;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod model;
pub mod pipeline;
pub mod sense;

pub use error::{Error, Result};
