//! Browser demo over the bundled toy graph.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and run natively too, so they are tested without a browser.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use pathnat_core::baselines::{BaselineKind, BaselineScorer};
use pathnat_core::dataset::Choice;
use pathnat_core::embed::EmbeddingTable;
use pathnat_core::eval::{avg_entropy, collect_ps_paths};
use pathnat_core::features::{EdgeFeatures, FeatureDims, FeaturizedPath, VertexFeatures};
use pathnat_core::graph::{Graph, RelationTable};
use pathnat_core::model::{predict_pair, score_path, train, Example, TrainingConfig};
use pathnat_core::pipeline::Resources;
use pathnat_core::sense::SenseInventory;

const EDGES: &str = include_str!("../../core/data/world/edges.tsv");
const VECTORS: &str = include_str!("../../core/data/world/vectors.txt");
const SENSES: &str = include_str!("../../core/data/world/senses.tsv");

fn world() -> &'static Resources {
    static WORLD: OnceLock<Resources> = OnceLock::new();
    WORLD.get_or_init(|| Resources {
        graph: Graph::parse(EDGES, RelationTable::conceptnet()).expect("bundled edges parse"),
        table: EmbeddingTable::parse(VECTORS).expect("bundled vectors parse"),
        senses: Some(SenseInventory::parse(SENSES).expect("bundled senses parse")),
    })
}

fn to_json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn scorer() -> BaselineScorer<'static> {
    let w = world();
    BaselineScorer { graph: &w.graph, table: &w.table, seed: 0 }
}

/// Sorted concept labels of the demo graph.
pub fn concepts_json() -> Result<String, String> {
    let mut labels: Vec<&str> = world().graph.concepts().collect();
    labels.sort_unstable();
    to_json(&labels)
}

#[derive(Serialize)]
struct RankedPath {
    score: f64,
    path: String,
}

/// Every path of at most `max_nodes` nodes between two concepts, best first
/// under the baseline `strategy` (`st`, `pair`, `flow` or `length`).
pub fn rank_json(source: &str, target: &str, strategy: &str, max_nodes: usize) -> Result<String, String> {
    let kind: BaselineKind = strategy.parse().map_err(|e: pathnat_core::Error| e.to_string())?;
    if !(2..=5).contains(&max_nodes) {
        return Err("max_nodes must lie in 2..=5".into());
    }
    let paths = world().graph.enumerate_paths(source, target, max_nodes).map_err(|e| e.to_string())?;
    let s = scorer();
    let mut ranked = paths
        .iter()
        .map(|p| Ok(RankedPath { score: s.score(kind, p)?, path: p.to_string() }))
        .collect::<pathnat_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    to_json(&ranked)
}

#[derive(Serialize)]
struct EntropyPoint {
    top_percent: f64,
    entropy: f64,
}

/// Average PS-relation entropy of the top-ranked 4-node paths at 10%..100%.
pub fn entropy_json(strategy: &str, count: usize, seed: u64) -> Result<String, String> {
    let kind: BaselineKind = strategy.parse().map_err(|e: pathnat_core::Error| e.to_string())?;
    let records = collect_ps_paths(&world().graph, None, 4, count, seed).map_err(|e| e.to_string())?;
    let s = BaselineScorer { seed, ..scorer() };
    let scores = records
        .iter()
        .map(|r| s.score(kind, &r.path))
        .collect::<pathnat_core::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    let curve = (1..=10)
        .map(|k| {
            let pct = 10.0 * k as f64;
            Ok(EntropyPoint { top_percent: pct, entropy: avg_entropy(&records, &scores, pct)? })
        })
        .collect::<pathnat_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&curve)
}

#[derive(Serialize)]
struct Recovery {
    spearman: f64,
    losses: Vec<f64>,
    /// (true, learned) score per path.
    points: Vec<(f64, f64)>,
}

fn random_path(rng: &mut ChaCha8Rng, dims: &FeatureDims, nodes: usize) -> FeaturizedPath {
    let mut r = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let vertices = (0..nodes)
        .map(|_| VertexFeatures { embedding: r(dims.vertex[0]), frequency: r(1)[0], degree: r(1)[0], sense_score: r(1)[0] })
        .collect();
    let edges = (0..nodes - 1)
        .map(|_| EdgeFeatures {
            ends_similarity: r(1)[0],
            direction: [r(1)[0], r(1)[0], r(1)[0]],
            relation: r(dims.edge[2]),
            provenance: [0.0; 6],
            sense_score: r(1)[0],
        })
        .collect();
    FeaturizedPath { vertices, edges }
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

/// Spearman correlation; ties are broken by position, fine for continuous scores.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let var: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    cov / var
}

/// Draws latent scores for random feature patterns, simulates pairwise
/// judgments from them, trains a small model and compares the orderings.
pub fn recovery_json(paths: usize, pairs: usize, epochs: usize, seed: u64) -> Result<String, String> {
    if !(5..=400).contains(&paths) || !(1..=50_000).contains(&pairs) || !(1..=50).contains(&epochs) {
        return Err("need 5..=400 paths, 1..=50000 pairs and 1..=50 epochs".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = FeatureDims::new(4, 6);
    let features: Vec<FeaturizedPath> = (0..paths)
        .map(|_| {
            let n = rng.gen_range(2..=4);
            random_path(&mut rng, &dims, n)
        })
        .collect();
    let latent: Vec<f64> = (0..paths).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let examples: Vec<Example> = (0..pairs)
        .map(|_| {
            let i = rng.gen_range(0..paths);
            let j = (i + rng.gen_range(1..paths)) % paths;
            let label = if rng.gen_bool(predict_pair(latent[i], latent[j])) { Choice::First } else { Choice::Second };
            Example { first: i, second: j, label }
        })
        .collect();
    let config = TrainingConfig { epochs, feature_len: 16, code_len: 5, learning_rate: 5e-3, seed, ..Default::default() };
    let (params, log) = train(dims, &features, &examples, None, &config).map_err(|e| e.to_string())?;
    let learned = features
        .iter()
        .map(|f| score_path(f, &params))
        .collect::<pathnat_core::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?;
    to_json(&Recovery {
        spearman: spearman(&latent, &learned),
        losses: log.epochs.iter().map(|e| e.loss).collect(),
        points: latent.into_iter().zip(learned).collect(),
    })
}

// ================================================================ JS exports

#[wasm_bindgen]
pub fn concepts() -> Result<String, JsValue> {
    concepts_json().map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rank(source: &str, target: &str, strategy: &str, max_nodes: usize) -> Result<String, JsValue> {
    rank_json(source, target, strategy, max_nodes).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn entropy_curve(strategy: &str, count: usize, seed: u64) -> Result<String, JsValue> {
    entropy_json(strategy, count, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn latent_recovery(paths: usize, pairs: usize, epochs: usize, seed: u64) -> Result<String, JsValue> {
    recovery_json(paths, pairs, epochs, seed).map_err(|e| JsValue::from_str(&e))
}
