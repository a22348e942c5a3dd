//! Word vectors: loading, cosine similarity, Zipf frequency, and PCA.

use std::collections::HashMap;
use std::path::Path as FsPath;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine similarity. Zero vectors give 0.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// Result of a vocabulary lookup. Out-of-vocabulary words map to the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Lookup {
    pub vector: Vec<f64>,
    pub oov: bool,
}

/// Frequency-ordered word vectors. Rank is the 1-based file position.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut table = EmbeddingTable {
            dim: 0,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        for (i, (word, vector)) in rows.into_iter().enumerate() {
            table.push(word, &vector, i + 1)?;
        }
        if table.words.is_empty() {
            return Err(Error::InvalidArgument("empty embedding table".into()));
        }
        Ok(table)
    }

    fn push(&mut self, word: String, vector: &[f64], line: usize) -> Result<()> {
        if self.words.is_empty() {
            if vector.is_empty() {
                return Err(Error::parse(line, "vector has no components"));
            }
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(Error::parse(
                line,
                format!("expected {} components, found {}", self.dim, vector.len()),
            ));
        }
        if self.index.contains_key(&word) {
            return Err(Error::parse(line, format!("duplicate word `{word}`")));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    /// Parses `word v1 ... vd` lines. A leading `count dim` header line is skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = EmbeddingTable {
            dim: 0,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        };
        let mut buf = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|s| !s.is_empty());
            let word = parts.next().unwrap_or_default();
            buf.clear();
            for p in parts {
                let x: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(i + 1, format!("bad component `{p}`")))?;
                buf.push(x);
            }
            if i == 0 && buf.len() == 1 && word.parse::<usize>().is_ok() && buf[0].fract() == 0.0 {
                continue;
            }
            table.push(word.to_string(), &buf, i + 1)?;
        }
        if table.words.is_empty() {
            return Err(Error::InvalidArgument("empty embedding table".into()));
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|i| i + 1)
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact match first; multiword labels (`ice_cream`) fall back to the mean of
    /// their constituents when every constituent is present.
    pub fn lookup(&self, word: &str) -> Lookup {
        if let Some(v) = self.vector(word) {
            return Lookup {
                vector: v.to_vec(),
                oov: false,
            };
        }
        let parts: Vec<&str> = word.split('_').filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            let vectors: Option<Vec<&[f64]>> = parts.iter().map(|p| self.vector(p)).collect();
            if let Some(vectors) = vectors {
                let mut mean = vec![0.0; self.dim];
                for v in &vectors {
                    for (m, x) in mean.iter_mut().zip(v.iter()) {
                        *m += x;
                    }
                }
                let n = vectors.len() as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                return Lookup {
                    vector: mean,
                    oov: false,
                };
            }
        }
        Lookup {
            vector: vec![0.0; self.dim],
            oov: true,
        }
    }

    /// Zipf estimate `1/rank`; out-of-vocabulary words get `1/(V+1)`.
    pub fn zipf_frequency(&self, word: &str) -> f64 {
        let rank = self.rank(word).unwrap_or(self.words.len() + 1);
        1.0 / rank as f64
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        cosine(&self.lookup(a).vector, &self.lookup(b).vector)
    }

    /// PCA over every vector in the table.
    pub fn fit_pca(&self, k: usize) -> Result<PcaProjection> {
        let rows: Vec<&[f64]> = (0..self.len()).map(|i| self.row(i)).collect();
        PcaProjection::fit(&rows, k)
    }
}

/// Mean-centred linear projection onto the top-`k` principal directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`.
    pub basis: Vec<Vec<f64>>,
    /// Variance along each basis row, non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaProjection {
    /// Covariance eigendecomposition. Each basis row is signed so that its
    /// largest-magnitude entry is positive.
    pub fn fit(rows: &[&[f64]], k: usize) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "PCA dimension {k} out of range 1..={d}"
            )));
        }
        if rows.len() < k + 1 {
            return Err(Error::Insufficient {
                what: "vectors for PCA",
                requested: k + 1,
                found: rows.len(),
            });
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("PCA rows differ in length".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut centred = vec![0.0; d];
        for r in rows {
            for (c, (x, m)) in centred.iter_mut().zip(r.iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..d {
                let ci = centred[i];
                if ci == 0.0 {
                    continue;
                }
                for j in i..d {
                    cov[(i, j)] += ci * centred[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / n;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut basis = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let mut row: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let pivot = row
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
            if pivot.1 < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            basis.push(row);
            explained_variance.push(eig.eigenvalues[idx].max(0.0));
        }
        Ok(PcaProjection {
            mean,
            basis,
            explained_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, vector: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(vector.iter().zip(&self.mean))
                    .map(|(b, (x, m))| b * (x - m))
                    .sum()
            })
            .collect()
    }

    /// `mean + basisᵀ · code`.
    pub fn reconstruct(&self, code: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (row, &c) in self.basis.iter().zip(code) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        out
    }
}
