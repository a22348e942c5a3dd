//! ConceptNet-style multigraph: loading, queries, and relational path enumeration.
//!
//! Edge dumps are UTF-8 TSV with columns
//! `start  end  relation  weight  source:weight[,source:weight...]`.
//! Rows sharing `(start, end, relation)` are merged: weights are summed and the
//! source sets are united. Edges of symmetric relations are stored with the
//! lexicographically smaller endpoint first, so `a RelatedTo b` and
//! `b RelatedTo a` denote the same edge.

mod path;
mod relations;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use path::{Direction, Path, PathType, Step};
pub use relations::{Directionality, RelationTable};

/// Normalizes a concept label: lowercase, whitespace runs joined by `_`.
/// ConceptNet URIs (`/c/en/ice_cream/n`) are reduced to their term.
pub fn normalize_label(raw: &str) -> Result<String> {
    let mut term = raw.trim();
    if let Some(rest) = term.strip_prefix("/c/") {
        term = rest.split('/').nth(1).unwrap_or_default();
    }
    let label = term
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_");
    if label.is_empty() {
        return Err(Error::InvalidArgument(format!("empty concept label `{raw}`")));
    }
    Ok(label)
}

/// Edge provenance sources, in provenance-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    WordNet,
    DBpedia,
    Verbosity,
    Wiktionary,
    OpenCyc,
    OpenMindCommonSense,
}

impl Source {
    pub const ALL: [Source; 6] = [
        Source::WordNet,
        Source::DBpedia,
        Source::Verbosity,
        Source::Wiktionary,
        Source::OpenCyc,
        Source::OpenMindCommonSense,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Most common per-source edge weight, used to split a merged edge weight.
    pub fn canonical_weight(self) -> f64 {
        match self {
            Source::WordNet => 2.0,
            _ => 1.0,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Source::WordNet => "wordnet",
            Source::DBpedia => "dbpedia",
            Source::Verbosity => "verbosity",
            Source::Wiktionary => "wiktionary",
            Source::OpenCyc => "opencyc",
            Source::OpenMindCommonSense => "omcs",
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "wordnet" => Ok(Source::WordNet),
            "dbpedia" => Ok(Source::DBpedia),
            "verbosity" => Ok(Source::Verbosity),
            "wiktionary" => Ok(Source::Wiktionary),
            "opencyc" => Ok(Source::OpenCyc),
            "omcs" | "openmindcommonsense" | "conceptnetomcs" => Ok(Source::OpenMindCommonSense),
            _ => Err(Error::UnknownSource(s.to_string())),
        }
    }
}

/// Splits `weight` over `sources` proportionally to their canonical weights.
/// A single source receives the whole weight.
pub fn split_provenance(weight: f64, sources: &BTreeSet<Source>) -> [f64; 6] {
    let mut out = [0.0; 6];
    let total: f64 = sources.iter().map(|s| s.canonical_weight()).sum();
    if total > 0.0 {
        for s in sources {
            out[s.index()] = weight * s.canonical_weight() / total;
        }
    }
    out
}

pub type ConceptId = u32;
pub type EdgeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub start: ConceptId,
    pub end: ConceptId,
    pub relation: u16,
    pub weight: f64,
    pub sources: BTreeSet<Source>,
    pub provenance: [f64; 6],
}

impl Edge {
    pub fn other(&self, v: ConceptId) -> ConceptId {
        if self.start == v {
            self.end
        } else {
            self.start
        }
    }
}

/// Immutable multigraph with adjacency indexed in both directions.
#[derive(Clone, Debug)]
pub struct Graph {
    relations: RelationTable,
    concepts: Vec<String>,
    concept_index: HashMap<String, ConceptId>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<EdgeId>>,
    lookup: HashMap<(ConceptId, ConceptId, u16), EdgeId>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
            && self.concepts == other.concepts
            && self.edges == other.edges
    }
}

/// One parsed dump row.
#[derive(Clone, Debug)]
struct Row {
    start: String,
    end: String,
    relation: u16,
    weight: f64,
    sources: BTreeSet<Source>,
}

fn parse_row(line: &str, lineno: usize, relations: &RelationTable) -> Result<Row> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 5 {
        return Err(Error::parse(
            lineno,
            format!("expected 5 tab-separated columns, found {}", cols.len()),
        ));
    }
    let start = normalize_label(cols[0]).map_err(|e| Error::parse(lineno, e.to_string()))?;
    let end = normalize_label(cols[1]).map_err(|e| Error::parse(lineno, e.to_string()))?;
    let relation = relations
        .id(cols[2].trim())
        .ok_or_else(|| Error::UnknownRelation(cols[2].trim().to_string()))?;
    let weight: f64 = cols[3]
        .trim()
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad weight `{}`", cols[3])))?;
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::parse(lineno, format!("weight must be >= 0, got {weight}")));
    }
    let mut sources = BTreeSet::new();
    for item in cols[4].split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, w) = item
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("expected source:weight, got `{item}`")))?;
        let source: Source = name.parse()?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad source weight `{item}`")))?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::parse(lineno, format!("source weight must be >= 0 in `{item}`")));
        }
        sources.insert(source);
    }
    if sources.is_empty() {
        return Err(Error::parse(lineno, "edge has no provenance source"));
    }
    Ok(Row {
        start,
        end,
        relation,
        weight,
        sources,
    })
}

impl Graph {
    /// Parses an edge dump against a relation table.
    pub fn parse(text: &str, relations: RelationTable) -> Result<Self> {
        // (start, end, relation) -> (weight, sources)
        let mut merged: BTreeMap<(String, String, u16), (f64, BTreeSet<Source>)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut row = parse_row(line, i + 1, &relations)?;
            if row.start == row.end {
                // self-loops can never lie on a simple path
                continue;
            }
            if relations.directionality(row.relation) == Directionality::Symmetric
                && row.start > row.end
            {
                std::mem::swap(&mut row.start, &mut row.end);
            }
            let entry = merged
                .entry((row.start, row.end, row.relation))
                .or_insert((0.0, BTreeSet::new()));
            entry.0 += row.weight;
            entry.1.extend(row.sources);
        }

        let labels: BTreeSet<&String> = merged.keys().flat_map(|(s, e, _)| [s, e]).collect();
        let concepts: Vec<String> = labels.into_iter().cloned().collect();
        let concept_index: HashMap<String, ConceptId> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as ConceptId))
            .collect();

        let mut edges = Vec::with_capacity(merged.len());
        let mut adjacency = vec![Vec::new(); concepts.len()];
        let mut lookup = HashMap::with_capacity(merged.len());
        for ((start, end, relation), (weight, sources)) in merged {
            let id = edges.len() as EdgeId;
            let s = concept_index[&start];
            let e = concept_index[&end];
            adjacency[s as usize].push(id);
            adjacency[e as usize].push(id);
            lookup.insert((s, e, relation), id);
            edges.push(Edge {
                start: s,
                end: e,
                relation,
                weight,
                provenance: split_provenance(weight, &sources),
                sources,
            });
        }
        Ok(Graph {
            relations,
            concepts,
            concept_index,
            edges,
            adjacency,
            lookup,
        })
    }

    pub fn load(edge_file: impl AsRef<FsPath>, relations: RelationTable) -> Result<Self> {
        let path = edge_file.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, relations)
    }

    /// Loads both the dump and its relation table from disk.
    pub fn load_with_table(
        edge_file: impl AsRef<FsPath>,
        relation_table: impl AsRef<FsPath>,
    ) -> Result<Self> {
        Self::load(edge_file, RelationTable::load(relation_table)?)
    }

    /// Re-serializes in dump format, rows sorted by (start, end, relation).
    /// Per-source weights are written as the provenance split.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(String, String, &str, String)> = self
            .edges
            .iter()
            .map(|e| {
                let sources = e
                    .sources
                    .iter()
                    .map(|s| format!("{}:{}", s.key(), e.provenance[s.index()]))
                    .collect::<Vec<_>>()
                    .join(",");
                (
                    self.label(e.start).to_string(),
                    self.label(e.end).to_string(),
                    self.relations.name(e.relation),
                    format!("{}\t{}", e.weight, sources),
                )
            })
            .collect();
        rows.sort();
        let mut out = String::new();
        for (s, e, r, rest) in rows {
            out.push_str(&format!("{s}\t{e}\t{r}\t{rest}\n"));
        }
        out
    }

    pub fn relations(&self) -> &RelationTable {
        &self.relations
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label(&self, id: ConceptId) -> &str {
        &self.concepts[id as usize]
    }

    pub fn id(&self, label: &str) -> Option<ConceptId> {
        self.concept_index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.concept_index.contains_key(label)
    }

    fn require(&self, label: &str) -> Result<ConceptId> {
        self.id(label)
            .ok_or_else(|| Error::UnknownConcept(label.to_string()))
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn incident(&self, v: ConceptId) -> &[EdgeId] {
        &self.adjacency[v as usize]
    }

    /// Number of incident edges, regardless of direction. Parallel edges count separately.
    pub fn degree(&self, concept: &str) -> Result<usize> {
        Ok(self.incident(self.require(concept)?).len())
    }

    /// Distinct neighbor ids, ascending.
    pub fn neighbors(&self, v: ConceptId) -> Vec<ConceptId> {
        let mut out: Vec<ConceptId> = self.incident(v).iter().map(|&e| self.edge(e).other(v)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The step label for traversing `edge` starting from vertex `from`.
    pub fn step_from(&self, edge: EdgeId, from: ConceptId) -> Step {
        let e = self.edge(edge);
        let direction = if self.relations.directionality(e.relation) == Directionality::Symmetric {
            Direction::Bidirectional
        } else if e.start == from {
            Direction::Forward
        } else {
            Direction::Backward
        };
        Step::new(self.relations.name(e.relation), direction)
    }

    /// Edges directly connecting `a` and `b`, as steps read from `a` to `b`.
    pub fn direct_steps(&self, a: &str, b: &str) -> Vec<Step> {
        let (Some(ia), Some(ib)) = (self.id(a), self.id(b)) else {
            return Vec::new();
        };
        let mut steps: Vec<Step> = self
            .incident(ia)
            .iter()
            .filter(|&&e| self.edge(e).other(ia) == ib)
            .map(|&e| self.step_from(e, ia))
            .collect();
        steps.sort();
        steps
    }

    /// Looks up the graph edge behind the `i`-th hop of `path`.
    pub fn path_edge(&self, path: &Path, i: usize) -> Result<&Edge> {
        let (s, e) = path.edge_endpoints(i);
        let relation = &path.steps[i].relation;
        let missing = || Error::UnknownEdge {
            start: s.to_string(),
            end: e.to_string(),
            relation: relation.clone(),
        };
        let rid = self
            .relations
            .id(relation)
            .ok_or_else(|| Error::UnknownRelation(relation.clone()))?;
        let (Some(si), Some(ei)) = (self.id(s), self.id(e)) else {
            return Err(missing());
        };
        self.lookup
            .get(&(si, ei, rid))
            .map(|&id| self.edge(id))
            .ok_or_else(missing)
    }

    /// Checks every path invariant against this graph.
    pub fn validate_path(&self, path: &Path, max_nodes: usize) -> Result<()> {
        path.check_shape()?;
        if path.node_count() > max_nodes {
            return Err(Error::InvalidArgument(format!(
                "path has {} nodes, limit is {max_nodes}",
                path.node_count()
            )));
        }
        if path.has_repeated_vertex() {
            return Err(Error::InvalidArgument(format!("path `{path}` repeats a vertex")));
        }
        for v in &path.vertices {
            self.require(v)?;
        }
        for i in 0..path.steps.len() {
            let edge = self.path_edge(path, i)?;
            let from = self.require(&path.vertices[i])?;
            let expected = self.step_from(self.lookup[&(edge.start, edge.end, edge.relation)], from);
            if expected != path.steps[i] {
                return Err(Error::InvalidArgument(format!(
                    "hop {i} of `{path}` has direction {:?}, expected {:?}",
                    path.steps[i].direction, expected.direction
                )));
            }
        }
        Ok(())
    }

    /// All simple paths from `source` to `target` with at most `max_nodes` nodes,
    /// ordered by vertex labels, then relation names, then directions.
    pub fn enumerate_paths(&self, source: &str, target: &str, max_nodes: usize) -> Result<Vec<Path>> {
        self.enumerate_paths_within(source, target, max_nodes, None)
    }

    /// As [`Graph::enumerate_paths`], restricted to vertices accepted by `allow`.
    pub fn enumerate_paths_within(
        &self,
        source: &str,
        target: &str,
        max_nodes: usize,
        allow: Option<&dyn Fn(ConceptId) -> bool>,
    ) -> Result<Vec<Path>> {
        if source == target {
            return Err(Error::InvalidArgument(format!(
                "source and target are both `{source}`"
            )));
        }
        if max_nodes < 2 {
            return Err(Error::InvalidArgument("max_nodes must be at least 2".into()));
        }
        let s = self.require(source)?;
        let t = self.require(target)?;
        let mut raw = Vec::new();
        let mut verts = vec![s];
        let mut edges = Vec::new();
        self.dfs(t, max_nodes, allow, &mut verts, &mut edges, &mut raw);
        let mut paths: Vec<Path> = raw
            .into_iter()
            .map(|(vs, es)| self.materialize(&vs, &es))
            .collect();
        paths.sort_by(|a, b| {
            a.vertices
                .cmp(&b.vertices)
                .then_with(|| {
                    let ra = a.steps.iter().map(|s| s.relation.as_str());
                    let rb = b.steps.iter().map(|s| s.relation.as_str());
                    ra.cmp(rb)
                })
                .then_with(|| {
                    let da = a.steps.iter().map(|s| s.direction);
                    let db = b.steps.iter().map(|s| s.direction);
                    da.cmp(db)
                })
        });
        Ok(paths)
    }

    fn dfs(
        &self,
        target: ConceptId,
        max_nodes: usize,
        allow: Option<&dyn Fn(ConceptId) -> bool>,
        verts: &mut Vec<ConceptId>,
        edges: &mut Vec<EdgeId>,
        out: &mut Vec<(Vec<ConceptId>, Vec<EdgeId>)>,
    ) {
        let here = *verts.last().expect("non-empty");
        for &e in self.incident(here) {
            let next = self.edge(e).other(here);
            if verts.contains(&next) {
                continue;
            }
            if let Some(allow) = allow {
                if !allow(next) {
                    continue;
                }
            }
            verts.push(next);
            edges.push(e);
            if next == target {
                out.push((verts.clone(), edges.clone()));
            } else if verts.len() < max_nodes {
                self.dfs(target, max_nodes, allow, verts, edges, out);
            }
            verts.pop();
            edges.pop();
        }
    }

    fn materialize(&self, verts: &[ConceptId], edges: &[EdgeId]) -> Path {
        let steps = edges
            .iter()
            .zip(verts)
            .map(|(&e, &from)| self.step_from(e, from))
            .collect();
        Path {
            vertices: verts.iter().map(|&v| self.label(v).to_string()).collect(),
            steps,
        }
    }

    /// Random-walk vocabulary sampling restricted to `allowed` words, starting at `center`.
    pub fn sample_vocabulary(
        &self,
        center: &str,
        allowed: &BTreeSet<String>,
        count: usize,
        seed: u64,
    ) -> Result<BTreeSet<String>> {
        if count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        let c = self.require(center)?;
        if !allowed.contains(center) {
            return Err(Error::InvalidArgument(format!(
                "center `{center}` is not an allowed word"
            )));
        }
        let ok = |v: ConceptId| allowed.contains(self.label(v));

        // reachable component inside the allowed subgraph
        let mut reach = HashSet::from([c]);
        let mut queue = VecDeque::from([c]);
        while let Some(v) = queue.pop_front() {
            for n in self.neighbors(v) {
                if ok(n) && reach.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if reach.len() < count {
            return Err(Error::Insufficient {
                what: "reachable allowed words",
                requested: count,
                found: reach.len(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = BTreeSet::from([c]);
        let mut here = c;
        while picked.len() < count {
            let options: Vec<ConceptId> = self.neighbors(here).into_iter().filter(|&n| ok(n)).collect();
            here = *options.choose(&mut rng).expect("component has more than one vertex");
            picked.insert(here);
        }
        Ok(picked.into_iter().map(|v| self.label(v).to_string()).collect())
    }

    /// Samples `count` distinct simple paths: an unordered endpoint pair is drawn
    /// uniformly from the vocabulary (or all concepts), every path between them of
    /// at most `max_nodes` nodes inside the induced subgraph is enumerated, and one
    /// is picked uniformly. Pairs without fresh paths are rejected and redrawn.
    pub fn sample_paths(
        &self,
        vocabulary: Option<&BTreeSet<String>>,
        max_nodes: usize,
        count: usize,
        seed: u64,
    ) -> Result<Vec<Path>> {
        let pool: Vec<ConceptId> = match vocabulary {
            Some(words) => words.iter().filter_map(|w| self.id(w)).collect(),
            None => (0..self.concepts.len() as ConceptId).collect(),
        };
        let member: HashSet<ConceptId> = pool.iter().copied().collect();
        let allow = |v: ConceptId| member.contains(&v);
        let filter: Option<&dyn Fn(ConceptId) -> bool> = vocabulary.map(|_| &allow as _);
        self.sample_with(&pool, count, seed, "distinct paths", |a, b| {
            self.enumerate_paths_within(self.label(a), self.label(b), max_nodes, filter)
        })
    }

    /// Rejection sampler shared by path and PS-path sampling. `candidates(a, b)`
    /// lists the paths available for endpoint pair `a < b`.
    pub(crate) fn sample_with<F>(
        &self,
        pool: &[ConceptId],
        count: usize,
        seed: u64,
        what: &'static str,
        mut candidates: F,
    ) -> Result<Vec<Path>>
    where
        F: FnMut(ConceptId, ConceptId) -> Result<Vec<Path>>,
    {
        if count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        let mut pool = pool.to_vec();
        pool.sort_unstable();
        pool.dedup();
        let n = pool.len();
        let total_pairs = n * n.saturating_sub(1) / 2;
        if total_pairs == 0 {
            return Err(Error::Insufficient {
                what,
                requested: count,
                found: 0,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cache: HashMap<(ConceptId, ConceptId), Vec<Path>> = HashMap::new();
        let mut used: HashMap<(ConceptId, ConceptId), HashSet<usize>> = HashMap::new();
        let mut exhausted: HashSet<(ConceptId, ConceptId)> = HashSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if exhausted.len() == total_pairs {
                return Err(Error::Insufficient {
                    what,
                    requested: count,
                    found: out.len(),
                });
            }
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let key = (pool[i.min(j)], pool[i.max(j)]);
            if exhausted.contains(&key) {
                continue;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
                let found = candidates(key.0, key.1)?;
                e.insert(found);
            }
            let paths = &cache[&key];
            if paths.is_empty() {
                exhausted.insert(key);
                continue;
            }
            let k = rng.gen_range(0..paths.len());
            let taken = used.entry(key).or_default();
            if taken.insert(k) {
                out.push(paths[k].clone());
            }
            if taken.len() == paths.len() {
                exhausted.insert(key);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "graph: {} concepts, {} edges, {} relation types",
            self.concepts.len(),
            self.edges.len(),
            self.relations.len()
        )
    }
}
