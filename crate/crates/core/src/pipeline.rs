//! Glue between the graph resources, the featurizer and a trained model.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::dataset::{training_examples, Judgment, PathPair};
use crate::embed::{EmbeddingTable, PcaProjection};
use crate::error::{Error, Result};
use crate::features::{FeatureMask, FeaturizedPath, Featurizer, VertexEncoding};
use crate::graph::{Graph, Path, RelationTable};
use crate::model::{self, Checkpoint, Heldout, ModelParameters, TrainingConfig, TrainingLog};
use crate::sense::SenseInventory;

/// Graph, embeddings and optional sense inventory.
pub struct Resources {
    pub graph: Graph,
    pub table: EmbeddingTable,
    pub senses: Option<SenseInventory>,
}

impl Resources {
    /// Loads an edge dump, a word-vector file, and optionally a relation table and sense inventory.
    pub fn load(
        edges: impl AsRef<FsPath>,
        vectors: impl AsRef<FsPath>,
        relations: Option<&FsPath>,
        senses: Option<&FsPath>,
    ) -> Result<Self> {
        let table = match relations {
            Some(p) => RelationTable::load(p)?,
            None => RelationTable::conceptnet(),
        };
        Ok(Resources {
            graph: Graph::load(edges, table)?,
            table: EmbeddingTable::load(vectors)?,
            senses: senses.map(SenseInventory::load).transpose()?,
        })
    }

    pub fn featurizer(&self, encoding: VertexEncoding, mask: FeatureMask) -> Featurizer<'_> {
        Featurizer::new(&self.graph, &self.table, self.senses.as_ref(), encoding, mask)
    }

    /// PCA to `dim` components fitted on the vectors of graph concepts; `None` keeps raw vectors.
    pub fn vertex_encoding(&self, dim: Option<usize>) -> Result<VertexEncoding> {
        let Some(k) = dim else {
            return Ok(VertexEncoding::Raw);
        };
        let vectors: Vec<Vec<f64>> = self
            .graph
            .concepts()
            .map(|c| self.table.lookup(c))
            .filter(|l| !l.oov)
            .map(|l| l.vector)
            .collect();
        let rows: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
        Ok(VertexEncoding::Pca(PcaProjection::fit(&rows, k)?))
    }

    pub fn featurize_all(&self, featurizer: &Featurizer<'_>, paths: &[Path]) -> Result<Vec<FeaturizedPath>> {
        paths.iter().map(|p| featurizer.featurize(p)).collect()
    }
}

/// Everything needed to score new paths, stored together in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalnessModel {
    pub config: TrainingConfig,
    pub encoding: VertexEncoding,
    pub params: ModelParameters,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config: TrainingConfig,
    encoding: VertexEncoding,
}

impl NaturalnessModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::to_value(ModelMeta {
            config: self.config.clone(),
            encoding: self.encoding.clone(),
        })
        .expect("model metadata serializes");
        Checkpoint {
            meta,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let meta: ModelMeta =
            serde_json::from_value(ck.meta).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        Ok(NaturalnessModel {
            config: meta.config,
            encoding: meta.encoding,
            params: ck.params,
        })
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    pub fn scorer<'a>(&self, resources: &'a Resources) -> Result<NaturalnessScorer<'a>> {
        let featurizer = resources.featurizer(self.encoding.clone(), self.config.mask);
        if featurizer.dims() != self.params.shape.dims {
            return Err(Error::Shape(format!(
                "model expects {:?}, resources give {:?}",
                self.params.shape.dims,
                featurizer.dims()
            )));
        }
        Ok(NaturalnessScorer {
            featurizer,
            params: self.params.clone(),
        })
    }
}

/// Scores graph paths with a trained model.
pub struct NaturalnessScorer<'a> {
    featurizer: Featurizer<'a>,
    params: ModelParameters,
}

impl NaturalnessScorer<'_> {
    pub fn score(&self, path: &Path) -> Result<f64> {
        model::score_path(&self.featurizer.featurize(path)?, &self.params)
    }
}

/// Featurizes judged pairs and trains a model, optionally tracking held-out accuracy.
pub fn train_on_judgments(
    resources: &Resources,
    pairs: &[PathPair],
    judgments: &[Judgment],
    heldout: Option<(&[PathPair], &[Judgment])>,
    config: &TrainingConfig,
) -> Result<(NaturalnessModel, TrainingLog)> {
    let encoding = resources.vertex_encoding(config.embedding_dim)?;
    let featurizer = resources.featurizer(encoding.clone(), config.mask);
    let (paths, examples) = training_examples(pairs, judgments)?;
    let features = resources.featurize_all(&featurizer, &paths)?;
    let held = match heldout {
        Some((hp, hj)) => {
            let (paths, examples) = training_examples(hp, hj)?;
            Some((resources.featurize_all(&featurizer, &paths)?, examples))
        }
        None => None,
    };
    let (params, log) = model::train(
        featurizer.dims(),
        &features,
        &examples,
        held.as_ref().map(|(p, e)| Heldout {
            paths: p,
            examples: e,
        }),
        config,
    )?;
    Ok((
        NaturalnessModel {
            config: config.clone(),
            encoding,
            params,
        },
        log,
    ))
}

/// Pairwise accuracy of an arbitrary path scorer on judged pairs.
pub fn judged_accuracy(
    pairs: &[PathPair],
    judgments: &[Judgment],
    mut score: impl FnMut(&Path) -> Result<f64>,
) -> Result<f64> {
    let (paths, examples) = training_examples(pairs, judgments)?;
    let scores: Vec<f64> = paths.iter().map(&mut score).collect::<Result<_>>()?;
    let scored: Vec<_> = examples
        .iter()
        .map(|e| (scores[e.first], scores[e.second], e.label))
        .collect();
    model::accuracy_from_scores(&scored)
}
