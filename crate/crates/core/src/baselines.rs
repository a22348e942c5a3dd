//! Heuristic path scorers used for comparison and as ranking strategies.

use std::fmt;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::{Graph, Path};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    SourceTarget,
    Pairwise,
    Flow,
    Length,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::SourceTarget,
        BaselineKind::Pairwise,
        BaselineKind::Flow,
        BaselineKind::Length,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            BaselineKind::SourceTarget => "st",
            BaselineKind::Pairwise => "pair",
            BaselineKind::Flow => "flow",
            BaselineKind::Length => "length",
        }
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "st" | "source_target" => Ok(BaselineKind::SourceTarget),
            "pair" | "pairwise" => Ok(BaselineKind::Pairwise),
            "flow" => Ok(BaselineKind::Flow),
            "length" => Ok(BaselineKind::Length),
            _ => Err(Error::InvalidArgument(format!("unknown baseline `{s}`"))),
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Cosine between the source and target embeddings.
pub fn st_score(path: &Path, table: &EmbeddingTable) -> f64 {
    table.similarity(path.source(), path.target())
}

/// Mean cosine over the endpoints of every edge.
pub fn pair_score(path: &Path, table: &EmbeddingTable) -> f64 {
    let vectors: Vec<Vec<f64>> = path.vertices.iter().map(|v| table.lookup(v).vector).collect();
    let total: f64 = vectors.windows(2).map(|w| cosine(&w[0], &w[1])).sum();
    total / (vectors.len() - 1) as f64
}

/// Resource reaching the target when one unit leaves the source split evenly
/// over its edges, and every interior vertex splits what arrives evenly over
/// its edges other than the arrival edge.
pub fn flow_score(path: &Path, graph: &Graph) -> Result<f64> {
    let source_degree = graph.degree(path.source())?;
    if source_degree == 0 {
        return Err(Error::InvalidArgument(format!("source `{}` has no edges", path.source())));
    }
    let mut flow = 1.0 / source_degree as f64;
    for v in path.interior() {
        let d = graph.degree(v)?;
        if d < 2 {
            return Err(Error::InvalidArgument(format!("interior vertex `{v}` has degree {d}")));
        }
        flow /= (d - 1) as f64;
    }
    Ok(flow)
}

/// FNV-1a over the path's text form; stable across platforms and releases.
pub fn path_hash(path: &Path) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.to_string().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Reproducible tie-break value in `(0, 1)` for a path under `seed`.
pub fn length_jitter(path: &Path, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ path_hash(path));
    rng.sample(Open01)
}

/// `-n` plus a seeded jitter, so shorter paths always win and equal lengths tie-break randomly.
pub fn length_score(path: &Path, seed: u64) -> f64 {
    -(path.node_count() as f64) + length_jitter(path, seed)
}

/// Scores any baseline over shared resources.
pub struct BaselineScorer<'a> {
    pub graph: &'a Graph,
    pub table: &'a EmbeddingTable,
    pub seed: u64,
}

impl BaselineScorer<'_> {
    pub fn score(&self, kind: BaselineKind, path: &Path) -> Result<f64> {
        Ok(match kind {
            BaselineKind::SourceTarget => st_score(path, self.table),
            BaselineKind::Pairwise => pair_score(path, self.table),
            BaselineKind::Flow => flow_score(path, self.graph)?,
            BaselineKind::Length => length_score(path, self.seed),
        })
    }
}
