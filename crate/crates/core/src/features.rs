//! Vertex and edge feature bundles for paths.
//!
//! Vertices carry (embedding, frequency, degree, sense score); edges carry
//! (ends similarity, direction one-hot, relation one-hot, provenance, sense score).
//! Masked features are zero vectors of their usual width.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbeddingTable, PcaProjection};
use crate::error::{Error, Result};
use crate::graph::{Graph, Path};
use crate::sense::{SenseInventory, SenseScorer};

pub const VERTEX_FEATURES: usize = 4;
pub const EDGE_FEATURES: usize = 5;

/// The nine individually switchable features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    VertexEmbedding,
    VertexFrequency,
    VertexDegree,
    VertexSense,
    EdgeSimilarity,
    EdgeDirection,
    EdgeRelation,
    EdgeProvenance,
    EdgeSense,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::VertexEmbedding,
        FeatureKind::VertexFrequency,
        FeatureKind::VertexDegree,
        FeatureKind::VertexSense,
        FeatureKind::EdgeSimilarity,
        FeatureKind::EdgeDirection,
        FeatureKind::EdgeRelation,
        FeatureKind::EdgeProvenance,
        FeatureKind::EdgeSense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::VertexEmbedding => "vertex-embedding",
            FeatureKind::VertexFrequency => "vertex-frequency",
            FeatureKind::VertexDegree => "vertex-degree",
            FeatureKind::VertexSense => "vertex-sense",
            FeatureKind::EdgeSimilarity => "edge-similarity",
            FeatureKind::EdgeDirection => "edge-direction",
            FeatureKind::EdgeRelation => "edge-relation",
            FeatureKind::EdgeProvenance => "edge-provenance",
            FeatureKind::EdgeSense => "edge-sense",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature `{s}`")))
    }
}

/// Set of enabled features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask(u16);

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask(FeatureKind::ALL.iter().fold(0, |m, k| m | k.bit()))
    }

    pub fn none() -> Self {
        FeatureMask(0)
    }

    pub fn only(kinds: &[FeatureKind]) -> Self {
        FeatureMask(kinds.iter().fold(0, |m, k| m | k.bit()))
    }

    pub fn without(self, kinds: &[FeatureKind]) -> Self {
        FeatureMask(kinds.iter().fold(self.0, |m, k| m & !k.bit()))
    }

    pub fn vertex_only() -> Self {
        Self::only(&FeatureKind::ALL[..VERTEX_FEATURES])
    }

    pub fn edge_only() -> Self {
        Self::only(&FeatureKind::ALL[VERTEX_FEATURES..])
    }

    pub fn enabled(self, kind: FeatureKind) -> bool {
        self.0 & kind.bit() != 0
    }

    /// Named ablation variants: `all`, `vertex-only`, `edge-only`, `no-sense`,
    /// and `no-<feature>` for each feature name.
    pub fn ablation(name: &str) -> Result<Self> {
        match name {
            "all" => Ok(Self::all()),
            "vertex-only" => Ok(Self::vertex_only()),
            "edge-only" => Ok(Self::edge_only()),
            "no-sense" => Ok(Self::all().without(&[FeatureKind::VertexSense, FeatureKind::EdgeSense])),
            other => {
                let kind = other
                    .strip_prefix("no-")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown ablation `{other}`")))?
                    .parse::<FeatureKind>()?;
                Ok(Self::all().without(&[kind]))
            }
        }
    }

    pub fn ablation_names() -> Vec<String> {
        let mut names = vec!["all".to_string()];
        names.extend(FeatureKind::ALL.iter().map(|k| format!("no-{}", k.name())));
        names.extend(["no-sense", "vertex-only", "edge-only"].map(String::from));
        names
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

/// Source of the vertex embedding feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexEncoding {
    /// Raw word vectors.
    Raw,
    /// PCA-reduced word vectors.
    Pca(PcaProjection),
    /// Word identity over a closed vocabulary; unknown words encode as zeros.
    OneHot(Vec<String>),
}

/// Widths of the vertex and edge features, in bundle order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub vertex: [usize; VERTEX_FEATURES],
    pub edge: [usize; EDGE_FEATURES],
}

impl FeatureDims {
    pub fn new(embedding: usize, relations: usize) -> Self {
        FeatureDims {
            vertex: [embedding, 1, 1, 1],
            edge: [1, 3, relations, 6, 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexFeatures {
    pub embedding: Vec<f64>,
    pub frequency: f64,
    pub degree: f64,
    pub sense_score: f64,
}

impl VertexFeatures {
    pub fn slices(&self) -> [&[f64]; VERTEX_FEATURES] {
        [
            &self.embedding,
            std::slice::from_ref(&self.frequency),
            std::slice::from_ref(&self.degree),
            std::slice::from_ref(&self.sense_score),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatures {
    pub ends_similarity: f64,
    pub direction: [f64; 3],
    pub relation: Vec<f64>,
    pub provenance: [f64; 6],
    pub sense_score: f64,
}

impl EdgeFeatures {
    pub fn slices(&self) -> [&[f64]; EDGE_FEATURES] {
        [
            std::slice::from_ref(&self.ends_similarity),
            &self.direction,
            &self.relation,
            &self.provenance,
            std::slice::from_ref(&self.sense_score),
        ]
    }
}

/// One element of the alternating sequence.
#[derive(Clone, Copy, Debug)]
pub enum Item<'a> {
    Vertex(&'a VertexFeatures),
    Edge(&'a EdgeFeatures),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizedPath {
    pub vertices: Vec<VertexFeatures>,
    pub edges: Vec<EdgeFeatures>,
}

impl FeaturizedPath {
    /// `2n - 1`.
    pub fn len(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn item(&self, i: usize) -> Item<'_> {
        if i.is_multiple_of(2) {
            Item::Vertex(&self.vertices[i / 2])
        } else {
            Item::Edge(&self.edges[i / 2])
        }
    }

    pub fn items(&self) -> impl Iterator<Item = Item<'_>> {
        (0..self.len()).map(|i| self.item(i))
    }

    pub fn check_dims(&self, dims: &FeatureDims) -> Result<()> {
        if self.vertices.is_empty() || self.edges.len() + 1 != self.vertices.len() {
            return Err(Error::Shape(format!(
                "{} vertices and {} edges do not alternate",
                self.vertices.len(),
                self.edges.len()
            )));
        }
        for v in &self.vertices {
            for (j, (s, &d)) in v.slices().iter().zip(&dims.vertex).enumerate() {
                if s.len() != d {
                    return Err(Error::Shape(format!("vertex feature {j} has width {} not {d}", s.len())));
                }
            }
        }
        for e in &self.edges {
            for (j, (s, &d)) in e.slices().iter().zip(&dims.edge).enumerate() {
                if s.len() != d {
                    return Err(Error::Shape(format!("edge feature {j} has width {} not {d}", s.len())));
                }
            }
        }
        Ok(())
    }
}

/// Turns graph paths into feature bundles.
pub struct Featurizer<'a> {
    graph: &'a Graph,
    table: &'a EmbeddingTable,
    inventory: Option<&'a SenseInventory>,
    encoding: VertexEncoding,
    mask: FeatureMask,
}

impl<'a> Featurizer<'a> {
    /// Without a sense inventory every sense score is the neutral 1.
    pub fn new(
        graph: &'a Graph,
        table: &'a EmbeddingTable,
        inventory: Option<&'a SenseInventory>,
        encoding: VertexEncoding,
        mask: FeatureMask,
    ) -> Self {
        Featurizer {
            graph,
            table,
            inventory,
            encoding,
            mask,
        }
    }

    pub fn mask(&self) -> FeatureMask {
        self.mask
    }

    pub fn encoding(&self) -> &VertexEncoding {
        &self.encoding
    }

    pub fn dims(&self) -> FeatureDims {
        let embedding = match &self.encoding {
            VertexEncoding::Raw => self.table.dim(),
            VertexEncoding::Pca(p) => p.output_dim(),
            VertexEncoding::OneHot(vocab) => vocab.len(),
        };
        FeatureDims::new(embedding, self.graph.relations().len())
    }

    fn embed_vertex(&self, word: &str) -> Vec<f64> {
        match &self.encoding {
            VertexEncoding::Raw => self.table.lookup(word).vector,
            VertexEncoding::Pca(p) => {
                let l = self.table.lookup(word);
                if l.oov {
                    vec![0.0; p.output_dim()]
                } else {
                    p.project(&l.vector)
                }
            }
            VertexEncoding::OneHot(vocab) => {
                let mut v = vec![0.0; vocab.len()];
                if let Ok(i) = vocab.binary_search_by(|w| w.as_str().cmp(word)) {
                    v[i] = 1.0;
                }
                v
            }
        }
    }

    pub fn featurize(&self, path: &Path) -> Result<FeaturizedPath> {
        path.check_shape()?;
        let dims = self.dims();
        let on = |k: FeatureKind| self.mask.enabled(k);
        let scorer = self.inventory.map(|inv| SenseScorer::new(self.table, inv));
        let assignment = scorer.as_ref().map(|s| s.disambiguate(path));

        let mut vertices = Vec::with_capacity(path.node_count());
        for (i, word) in path.vertices.iter().enumerate() {
            let degree = self.graph.degree(word)? as f64;
            let sense = match (&scorer, &assignment) {
                (Some(s), Some(a)) => s.vertex_sense_score(path, a, i),
                _ => 1.0,
            };
            vertices.push(VertexFeatures {
                embedding: if on(FeatureKind::VertexEmbedding) {
                    self.embed_vertex(word)
                } else {
                    vec![0.0; dims.vertex[0]]
                },
                frequency: if on(FeatureKind::VertexFrequency) {
                    self.table.zipf_frequency(word)
                } else {
                    0.0
                },
                degree: if on(FeatureKind::VertexDegree) { degree } else { 0.0 },
                sense_score: if on(FeatureKind::VertexSense) { sense } else { 0.0 },
            });
        }

        let mut edges = Vec::with_capacity(path.steps.len());
        for (i, step) in path.steps.iter().enumerate() {
            let edge = self.graph.path_edge(path, i)?;
            let mut direction = [0.0; 3];
            if on(FeatureKind::EdgeDirection) {
                direction[step.direction.one_hot_index()] = 1.0;
            }
            let mut relation = vec![0.0; dims.edge[2]];
            if on(FeatureKind::EdgeRelation) {
                relation[edge.relation as usize] = 1.0;
            }
            let sense = match (&scorer, &assignment) {
                (Some(s), Some(a)) => s.edge_sense_score(path, a, i),
                _ => 1.0,
            };
            edges.push(EdgeFeatures {
                ends_similarity: if on(FeatureKind::EdgeSimilarity) {
                    cosine(
                        &self.table.lookup(&path.vertices[i]).vector,
                        &self.table.lookup(&path.vertices[i + 1]).vector,
                    )
                } else {
                    0.0
                },
                direction,
                relation,
                provenance: if on(FeatureKind::EdgeProvenance) {
                    edge.provenance
                } else {
                    [0.0; 6]
                },
                sense_score: if on(FeatureKind::EdgeSense) { sense } else { 0.0 },
            });
        }
        Ok(FeaturizedPath { vertices, edges })
    }
}

const CACHE_MAGIC: &str = "pathnat-features v1";

/// Line-oriented cache:
///
/// ```text
/// pathnat-features v1
/// dims <emb> 1 1 1 | 1 3 <relations> 6 1
/// path <n>
/// v <embedding...> <frequency> <degree> <sense>
/// e <similarity> <direction x3> <relation...> <provenance x6> <sense>
/// ```
pub fn write_feature_cache(dims: &FeatureDims, paths: &[FeaturizedPath]) -> String {
    let mut out = String::new();
    out.push_str(CACHE_MAGIC);
    out.push('\n');
    let v: Vec<String> = dims.vertex.iter().map(usize::to_string).collect();
    let e: Vec<String> = dims.edge.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "dims {} | {}", v.join(" "), e.join(" "));
    for p in paths {
        let _ = writeln!(out, "path {}", p.vertices.len());
        for item in p.items() {
            let (tag, values): (&str, Vec<&[f64]>) = match item {
                Item::Vertex(v) => ("v", v.slices().to_vec()),
                Item::Edge(e) => ("e", e.slices().to_vec()),
            };
            out.push_str(tag);
            for x in values.into_iter().flatten() {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
    }
    out
}

/// Lines starting with `#` are ignored.
pub fn read_feature_cache(text: &str) -> Result<(FeatureDims, Vec<FeaturizedPath>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l.trim() == CACHE_MAGIC => {}
        _ => return Err(Error::parse(1, format!("expected `{CACHE_MAGIC}` header"))),
    }
    let (dl, dims_line) = lines.next().ok_or_else(|| Error::parse(2, "missing dims line"))?;
    let dims = parse_dims(dims_line).ok_or_else(|| Error::parse(dl + 1, "malformed dims line"))?;

    let mut paths = Vec::new();
    let mut current: Option<(usize, FeaturizedPath)> = None;
    for (i, line) in lines {
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("path") => {
                if let Some((_, p)) = current.take() {
                    paths.push(p);
                }
                let n: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| Error::parse(lineno, "bad node count"))?;
                current = Some((n, FeaturizedPath { vertices: Vec::new(), edges: Vec::new() }));
            }
            Some(tag @ ("v" | "e")) => {
                let (_, p) = current
                    .as_mut()
                    .ok_or_else(|| Error::parse(lineno, "feature row before `path`"))?;
                let values: Vec<f64> = parts
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(lineno, "bad number"))?;
                let expect_vertex = p.len() % 2 == 0;
                if (tag == "v") != expect_vertex {
                    return Err(Error::parse(lineno, "vertex and edge rows must alternate"));
                }
                if tag == "v" {
                    let w = dims.vertex[0];
                    if values.len() != w + 3 {
                        return Err(Error::parse(lineno, format!("expected {} values", w + 3)));
                    }
                    p.vertices.push(VertexFeatures {
                        embedding: values[..w].to_vec(),
                        frequency: values[w],
                        degree: values[w + 1],
                        sense_score: values[w + 2],
                    });
                } else {
                    let r = dims.edge[2];
                    if values.len() != r + 11 {
                        return Err(Error::parse(lineno, format!("expected {} values", r + 11)));
                    }
                    let mut direction = [0.0; 3];
                    direction.copy_from_slice(&values[1..4]);
                    let mut provenance = [0.0; 6];
                    provenance.copy_from_slice(&values[4 + r..10 + r]);
                    p.edges.push(EdgeFeatures {
                        ends_similarity: values[0],
                        direction,
                        relation: values[4..4 + r].to_vec(),
                        provenance,
                        sense_score: values[10 + r],
                    });
                }
            }
            None => {}
            Some(other) => return Err(Error::parse(lineno, format!("unknown row tag `{other}`"))),
        }
        if let Some((n, p)) = &current {
            if p.vertices.len() > *n {
                return Err(Error::parse(lineno, "more vertices than declared"));
            }
        }
    }
    if let Some((_, p)) = current.take() {
        paths.push(p);
    }
    for p in &paths {
        p.check_dims(&dims)?;
    }
    Ok((dims, paths))
}

fn parse_dims(line: &str) -> Option<FeatureDims> {
    let rest = line.strip_prefix("dims ")?;
    let (v, e) = rest.split_once('|')?;
    let v: Vec<usize> = v.split_whitespace().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    let e: Vec<usize> = e.split_whitespace().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    Some(FeatureDims {
        vertex: v.try_into().ok()?,
        edge: e.try_into().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelationTable;

    fn setup() -> (Graph, EmbeddingTable) {
        let g = Graph::parse(
            "hub\ta\tIsA\t1\tomcs:1\nb\thub\tIsA\t1\tomcs:1\nhub\tc\tRelatedTo\t1\twordnet:2\n\
             d\thub\tHasA\t1\tomcs:1\nhub\td\tPartOf\t2\tomcs:1,wordnet:2\n",
            RelationTable::conceptnet(),
        )
        .unwrap();
        let t = EmbeddingTable::parse("hub 1 0 0\na 1 1 0\nb 0 1 0\nc 0 0 1\n").unwrap();
        (g, t)
    }

    #[test]
    fn two_node_path_has_three_items() {
        let (g, t) = setup();
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Raw, FeatureMask::all());
        let p: Path = "hub -[IsA]-> a".parse().unwrap();
        let fp = f.featurize(&p).unwrap();
        assert_eq!(fp.len(), 3);
        assert_eq!(fp.vertices[0].degree, 5.0);
        assert_eq!(fp.vertices[0].frequency, 1.0);
        assert_eq!(fp.vertices[1].frequency, 0.5);
        assert_eq!(fp.edges[0].direction, [1.0, 0.0, 0.0]);
        assert_eq!(fp.edges[0].relation.len(), 46);
        assert_eq!(fp.edges[0].relation[2], 1.0);
        fp.check_dims(&f.dims()).unwrap();
    }

    #[test]
    fn direction_one_hots() {
        let (g, t) = setup();
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Raw, FeatureMask::all());
        let p: Path = "c <-[RelatedTo]-> hub <-[IsA]- b".parse().unwrap();
        let fp = f.featurize(&p).unwrap();
        assert_eq!(fp.edges[0].direction, [0.0, 0.0, 1.0]);
        assert_eq!(fp.edges[1].direction, [0.0, 1.0, 0.0]);
        assert_eq!(fp.edges[0].provenance, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mixed: Path = "hub -[PartOf]-> d".parse().unwrap();
        let fp = f.featurize(&mixed).unwrap();
        let prov = fp.edges[0].provenance;
        assert!((prov[0] - 4.0 / 3.0).abs() < 1e-12 && (prov[5] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_only_mask() {
        let (g, t) = setup();
        let mask = FeatureMask::only(&[FeatureKind::EdgeSimilarity]);
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Raw, mask);
        let p: Path = "a <-[IsA]- hub <-[RelatedTo]-> c".parse().unwrap();
        let fp = f.featurize(&p).unwrap();
        for v in &fp.vertices {
            assert!(v.slices().iter().all(|s| s.iter().all(|&x| x == 0.0)));
        }
        for (i, e) in fp.edges.iter().enumerate() {
            let want = cosine(
                t.vector(&p.vertices[i]).unwrap(),
                t.vector(&p.vertices[i + 1]).unwrap(),
            );
            assert_eq!(e.ends_similarity, want);
            let rest: f64 = e.slices()[1..].iter().flat_map(|s| s.iter()).map(|x| x.abs()).sum();
            assert_eq!(rest, 0.0);
        }
        fp.check_dims(&f.dims()).unwrap();
    }

    #[test]
    fn one_hot_and_pca_encodings() {
        let (g, t) = setup();
        let vocab = vec!["a".to_string(), "hub".to_string()];
        let f = Featurizer::new(&g, &t, None, VertexEncoding::OneHot(vocab), FeatureMask::all());
        let p: Path = "hub -[IsA]-> a".parse().unwrap();
        let fp = f.featurize(&p).unwrap();
        assert_eq!(fp.vertices[0].embedding, vec![0.0, 1.0]);
        assert_eq!(fp.vertices[1].embedding, vec![1.0, 0.0]);

        let pca = t.fit_pca(2).unwrap();
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Pca(pca), FeatureMask::all());
        let fp = f.featurize(&p).unwrap();
        assert_eq!(fp.vertices[0].embedding.len(), 2);
        assert_eq!(f.dims().vertex, [2, 1, 1, 1]);
    }

    #[test]
    fn unknown_concept_propagates() {
        let (g, t) = setup();
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Raw, FeatureMask::all());
        let p: Path = "zzz -[IsA]-> a".parse().unwrap();
        assert!(f.featurize(&p).is_err());
    }

    #[test]
    fn ablation_names_parse() {
        for name in FeatureMask::ablation_names() {
            FeatureMask::ablation(&name).unwrap();
        }
        let m = FeatureMask::ablation("no-edge-similarity").unwrap();
        assert!(!m.enabled(FeatureKind::EdgeSimilarity));
        assert!(m.enabled(FeatureKind::EdgeSense));
        assert!(FeatureMask::ablation("bogus").is_err());
    }

    #[test]
    fn cache_round_trip() {
        let (g, t) = setup();
        let f = Featurizer::new(&g, &t, None, VertexEncoding::Raw, FeatureMask::all());
        let paths: Vec<FeaturizedPath> = ["hub -[IsA]-> a", "c <-[RelatedTo]-> hub <-[IsA]- b"]
            .iter()
            .map(|s| f.featurize(&s.parse().unwrap()).unwrap())
            .collect();
        let text = write_feature_cache(&f.dims(), &paths);
        let (dims, back) = read_feature_cache(&text).unwrap();
        assert_eq!(dims, f.dims());
        assert_eq!(back, paths);
        assert!(read_feature_cache("nope\n").is_err());
    }
}
