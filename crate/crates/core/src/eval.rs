//! Downstream analyses: annotator agreement, relation entropy of natural
//! paths, retrieval with query expansion, and analogy solving.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{length_jitter, length_score, pair_score};
use crate::dataset::{Choice, MultiResponseSet, PathPair};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{ConceptId, Graph, Path, PathType};

// ---------------------------------------------------------------- agreement

/// Vote counts on one multi-annotator question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpinionSplit {
    pub majority: usize,
    pub minority: usize,
}

impl OpinionSplit {
    pub fn from_votes(a: usize, b: usize) -> Self {
        OpinionSplit {
            majority: a.max(b),
            minority: a.min(b),
        }
    }

    pub fn panel(&self) -> usize {
        self.majority + self.minority
    }

    pub fn is_tie(&self) -> bool {
        self.majority == self.minority
    }
}

impl fmt::Display for OpinionSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.majority, self.minority)
    }
}

pub fn opinion_splits(set: &MultiResponseSet) -> Vec<(String, OpinionSplit)> {
    set.questions()
        .map(|(id, _)| {
            let (a, b) = set.votes(id);
            (id.to_string(), OpinionSplit::from_votes(a, b))
        })
        .collect()
}

/// Accuracy of an oracle that always picks the majority: mean of majority/panel.
pub fn agreement_upper_bound_from_splits(splits: &[OpinionSplit]) -> Result<f64> {
    if splits.is_empty() {
        return Err(Error::InvalidArgument("no questions".into()));
    }
    let mut total = 0.0;
    for s in splits {
        if s.panel() == 0 {
            return Err(Error::InvalidArgument("question without responses".into()));
        }
        total += s.majority as f64 / s.panel() as f64;
    }
    Ok(total / splits.len() as f64)
}

pub fn agreement_upper_bound(set: &MultiResponseSet) -> Result<f64> {
    let splits: Vec<OpinionSplit> = opinion_splits(set).into_iter().map(|(_, s)| s).collect();
    agreement_upper_bound_from_splits(&splits)
}

/// Model behaviour on questions sharing one opinion split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitBucket {
    pub split: OpinionSplit,
    pub questions: usize,
    /// Questions whose strictly higher-scored path is the majority choice.
    pub correct: usize,
    /// Mean predicted probability of the majority choice.
    pub mean_confidence: f64,
}

/// Buckets questions by opinion split, skipping ties, and compares the model's
/// preference with the majority.
pub fn confidence_analysis(
    set: &MultiResponseSet,
    pairs: &[PathPair],
    mut score: impl FnMut(&Path) -> Result<f64>,
) -> Result<Vec<SplitBucket>> {
    let by_id: HashMap<&str, &PathPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut buckets: BTreeMap<OpinionSplit, (usize, usize, f64)> = BTreeMap::new();
    for (id, split) in opinion_splits(set) {
        if split.is_tie() {
            continue;
        }
        let pair = by_id.get(id.as_str()).ok_or_else(|| Error::UnknownPair(id.clone()))?;
        let (first, _) = set.votes(&id);
        let majority = if first == split.majority { Choice::First } else { Choice::Second };
        let (m1, m2) = (score(&pair.first)?, score(&pair.second)?);
        let (m_major, m_minor) = match majority {
            Choice::First => (m1, m2),
            Choice::Second => (m2, m1),
        };
        let entry = buckets.entry(split).or_insert((0, 0, 0.0));
        entry.0 += 1;
        entry.1 += usize::from(m_major > m_minor);
        entry.2 += crate::model::predict_pair(m_major, m_minor);
    }
    Ok(buckets
        .into_iter()
        .rev()
        .map(|(split, (n, correct, conf))| SplitBucket {
            split,
            questions: n,
            correct,
            mean_confidence: conf / n as f64,
        })
        .collect())
}

// ------------------------------------------------------------------ entropy

/// A path whose endpoints are also joined directly, with that direct relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsRecord {
    pub path: Path,
    pub ps_relation: String,
}

/// Counts of path-summarizing relations per path type.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PsRelationCounter {
    counts: BTreeMap<PathType, BTreeMap<String, usize>>,
}

impl PsRelationCounter {
    pub fn add(&mut self, path_type: PathType, relation: &str) {
        *self
            .counts
            .entry(path_type)
            .or_default()
            .entry(relation.to_string())
            .or_default() += 1;
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a PsRecord>) -> Self {
        let mut c = Self::default();
        for r in records {
            c.add(r.path.path_type(), &r.ps_relation);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn type_count(&self) -> usize {
        self.counts.len()
    }

    /// Count-weighted mean over path types of the entropy (nats) of their PS relations.
    pub fn average_entropy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::InvalidArgument("no PS records selected".into()));
        }
        let mut acc = 0.0;
        for relations in self.counts.values() {
            let ci: usize = relations.values().sum();
            let h: f64 = relations
                .values()
                .map(|&c| {
                    let p = c as f64 / ci as f64;
                    -p * p.ln()
                })
                .sum();
            acc += ci as f64 * h;
        }
        Ok(acc / total as f64)
    }
}

/// Indices of the `ceil(top_percent% · n)` best-scored items; ties keep input order.
pub fn top_fraction(scores: &[f64], top_percent: f64) -> Result<Vec<usize>> {
    if !(top_percent > 0.0 && top_percent <= 100.0) {
        return Err(Error::InvalidArgument(format!("top_percent {top_percent} outside (0, 100]")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let keep = ((top_percent / 100.0) * scores.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order.truncate(keep.min(scores.len()));
    Ok(order)
}

/// Average PS entropy over the top `top_percent` of records by score.
pub fn avg_entropy(records: &[PsRecord], scores: &[f64], top_percent: f64) -> Result<f64> {
    if records.len() != scores.len() {
        return Err(Error::Shape(format!("{} records, {} scores", records.len(), scores.len())));
    }
    let keep = top_fraction(scores, top_percent)?;
    PsRelationCounter::from_records(keep.iter().map(|&i| &records[i])).average_entropy()
}

/// Samples paths of exactly `path_nodes` nodes whose endpoints share a direct
/// edge; one record per direct edge.
pub fn collect_ps_paths(
    graph: &Graph,
    vocabulary: Option<&BTreeSet<String>>,
    path_nodes: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PsRecord>> {
    if path_nodes < 3 {
        return Err(Error::InvalidArgument("PS paths need at least 3 nodes".into()));
    }
    let pool: Vec<ConceptId> = match vocabulary {
        Some(words) => words.iter().filter_map(|w| graph.id(w)).collect(),
        None => (0..graph.concept_count() as ConceptId).collect(),
    };
    let member: HashSet<ConceptId> = pool.iter().copied().collect();
    let allow = |v: ConceptId| member.contains(&v);
    let filter: Option<&dyn Fn(ConceptId) -> bool> = vocabulary.map(|_| &allow as _);
    let paths = graph.sample_with(&pool, count, seed, "paths with a PS relation", |a, b| {
        let (la, lb) = (graph.label(a), graph.label(b));
        if graph.direct_steps(la, lb).is_empty() {
            return Ok(Vec::new());
        }
        let mut found = graph.enumerate_paths_within(la, lb, path_nodes, filter)?;
        found.retain(|p| p.node_count() == path_nodes);
        Ok(found)
    })?;
    let mut out = Vec::new();
    for path in paths {
        let mut relations: Vec<String> = graph
            .direct_steps(path.source(), path.target())
            .into_iter()
            .map(|s| s.relation)
            .collect();
        relations.dedup();
        for r in relations {
            out.push(PsRecord {
                path: path.clone(),
                ps_relation: r,
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- retrieval

/// Words dropped before indexing and querying.
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can",
    "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "more", "most", "no", "not", "of", "on", "one", "or", "other", "our", "out", "she",
    "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to",
    "up", "was", "we", "were", "what", "when", "which", "who", "will", "with", "would", "you",
];

/// Lowercases, splits on non-alphanumerics and drops stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| STOP_WORDS.binary_search(&t.as_str()).is_err())
        .collect()
}

fn term_counts(tokens: impl IntoIterator<Item = String>) -> BTreeMap<String, f64> {
    let mut tf = BTreeMap::new();
    for t in tokens {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

/// Raw term frequency times `ln(N / df)`.
#[derive(Clone, Debug)]
pub struct TfidfIndex {
    doc_ids: Vec<String>,
    df: HashMap<String, usize>,
    vectors: Vec<BTreeMap<String, f64>>,
    norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

impl TfidfIndex {
    pub fn build<I, S, T>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut doc_ids = Vec::new();
        let mut counts = Vec::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        for (id, text) in docs {
            let tf = term_counts(tokenize(text.as_ref()));
            for t in tf.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            doc_ids.push(id.into());
            counts.push(tf);
        }
        if doc_ids.is_empty() {
            return Err(Error::InvalidArgument("cannot index an empty corpus".into()));
        }
        let n = doc_ids.len() as f64;
        let vectors: Vec<BTreeMap<String, f64>> = counts
            .into_iter()
            .map(|tf| {
                tf.into_iter()
                    .map(|(t, c)| {
                        let w = c * (n / df[&t] as f64).ln();
                        (t, w)
                    })
                    .collect()
            })
            .collect();
        let norms = vectors
            .iter()
            .map(|v| v.values().map(|w| w * w).sum::<f64>().sqrt())
            .collect();
        Ok(TfidfIndex {
            doc_ids,
            df,
            vectors,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn weight(&self, doc_id: &str, term: &str) -> Option<f64> {
        let i = self.doc_ids.iter().position(|d| d == doc_id)?;
        Some(self.vectors[i].get(term).copied().unwrap_or(0.0))
    }

    /// Cosine ranking of documents with a positive score; ties by document id.
    pub fn search(&self, terms: &[String], k: usize) -> Vec<Hit> {
        let n = self.len() as f64;
        let tokens = terms.iter().flat_map(|t| tokenize(t));
        let query: Vec<(String, f64)> = term_counts(tokens)
            .into_iter()
            .filter_map(|(t, c)| self.df.get(&t).map(|&df| (t, c * (n / df as f64).ln())))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        let qnorm = query.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if qnorm == 0.0 {
            return Vec::new();
        }
        let mut hits: Vec<Hit> = self
            .vectors
            .iter()
            .zip(&self.norms)
            .zip(&self.doc_ids)
            .filter_map(|((v, &norm), id)| {
                let dot: f64 = query.iter().map(|(t, w)| w * v.get(t).copied().unwrap_or(0.0)).sum();
                (dot > 0.0).then(|| Hit {
                    doc_id: id.clone(),
                    score: dot / (norm * qnorm),
                })
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        hits.truncate(k);
        hits
    }
}

/// Relevant documents among the first `k`, divided by `k`.
pub fn precision_at_k(ranked: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|d| relevant.contains(*d)).count();
    hits as f64 / k as f64
}

/// Mean of the precision at each relevant rank, over all relevant documents.
pub fn average_precision(ranked: &[String], relevant: &HashSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0;
    let mut total = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if relevant.contains(d) {
            hits += 1;
            total += hits as f64 / (i + 1) as f64;
        }
    }
    total / relevant.len() as f64
}

pub fn mean_average_precision(runs: &[(Vec<String>, HashSet<String>)]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no queries".into()));
    }
    Ok(runs.iter().map(|(r, rel)| average_precision(r, rel)).sum::<f64>() / runs.len() as f64)
}

/// Ranking depth used for average precision.
pub const MAP_DEPTH: usize = 1000;

/// Documents, queries and binary relevance judgments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<(String, String)>,
    pub queries: Vec<(String, Vec<String>)>,
    pub relevance: HashMap<String, HashSet<String>>,
}

impl Corpus {
    /// `query_id<TAB>terms` per line.
    pub fn parse_queries(text: &str) -> Result<Vec<(String, Vec<String>)>> {
        data_lines(text)
            .map(|(line, l)| {
                let (id, terms) = l
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(line, "expected `query_id<TAB>terms`"))?;
                Ok((id.trim().to_string(), tokenize(terms)))
            })
            .collect()
    }

    /// `query_id<TAB>doc_id<TAB>{0,1}` per line.
    pub fn parse_relevance(text: &str) -> Result<HashMap<String, HashSet<String>>> {
        let mut out: HashMap<String, HashSet<String>> = HashMap::new();
        for (line, l) in data_lines(text) {
            let cols: Vec<&str> = l.split('\t').map(str::trim).collect();
            let [q, d, rel] = cols[..] else {
                return Err(Error::parse(line, "expected `query_id<TAB>doc_id<TAB>0|1`"));
            };
            let entry = out.entry(q.to_string()).or_default();
            match rel {
                "1" => {
                    entry.insert(d.to_string());
                }
                "0" => {}
                _ => return Err(Error::parse(line, format!("relevance must be 0 or 1, got `{rel}`"))),
            }
        }
        Ok(out)
    }

    /// Reads `dir/docs/*` (document id = file stem), `dir/queries.tsv` and `dir/qrels.tsv`.
    pub fn load(dir: impl AsRef<FsPath>) -> Result<Self> {
        let dir = dir.as_ref();
        let docs_dir = dir.join("docs");
        let mut documents = Vec::new();
        let entries = std::fs::read_dir(&docs_dir).map_err(|e| Error::io(&docs_dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&docs_dir, e))?.path();
            if !path.is_file() {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::InvalidArgument(format!("bad document name {}", path.display())))?
                .to_string();
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            documents.push((id, text));
        }
        documents.sort();
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        Ok(Corpus {
            documents,
            queries: Self::parse_queries(&read("queries.tsv")?)?,
            relevance: Self::parse_relevance(&read("qrels.tsv")?)?,
        })
    }

    pub fn index(&self) -> Result<TfidfIndex> {
        TfidfIndex::build(self.documents.iter().map(|(id, t)| (id.clone(), t.as_str())))
    }

    pub fn relevant(&self, query_id: &str) -> HashSet<String> {
        self.relevance.get(query_id).cloned().unwrap_or_default()
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Per-query P@10 and AP over the given term lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalScores {
    pub p_at_10: Vec<f64>,
    pub ap: Vec<f64>,
}

impl RetrievalScores {
    pub fn mean_p_at_10(&self) -> f64 {
        mean(&self.p_at_10)
    }

    pub fn map(&self) -> f64 {
        mean(&self.ap)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn evaluate_queries(index: &TfidfIndex, queries: &[(String, Vec<String>)], corpus: &Corpus) -> RetrievalScores {
    let mut out = RetrievalScores {
        p_at_10: Vec::new(),
        ap: Vec::new(),
    };
    for (qid, terms) in queries {
        let ranked: Vec<String> = index.search(terms, MAP_DEPTH).into_iter().map(|h| h.doc_id).collect();
        let rel = corpus.relevant(qid);
        out.p_at_10.push(precision_at_k(&ranked, &rel, 10));
        out.ap.push(average_precision(&ranked, &rel));
    }
    out
}

/// Queries whose unexpanded P@10 is zero.
pub fn hard_queries(index: &TfidfIndex, corpus: &Corpus) -> Vec<(String, Vec<String>)> {
    corpus
        .queries
        .iter()
        .filter(|(qid, terms)| {
            let ranked: Vec<String> = index.search(terms, 10).into_iter().map(|h| h.doc_id).collect();
            precision_at_k(&ranked, &corpus.relevant(qid), 10) == 0.0
        })
        .cloned()
        .collect()
}

// ---------------------------------------------------------------- expansion

/// How connecting paths are ordered before their interior words are harvested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionStrategy {
    Naturalness,
    Pairwise,
    Length,
    Random,
    NaturalnessLength,
}

impl ExpansionStrategy {
    pub const ALL: [ExpansionStrategy; 5] = [
        ExpansionStrategy::Naturalness,
        ExpansionStrategy::Pairwise,
        ExpansionStrategy::Length,
        ExpansionStrategy::Random,
        ExpansionStrategy::NaturalnessLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExpansionStrategy::Naturalness => "naturalness",
            ExpansionStrategy::Pairwise => "pairwise",
            ExpansionStrategy::Length => "length",
            ExpansionStrategy::Random => "random",
            ExpansionStrategy::NaturalnessLength => "naturalness+length",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, ExpansionStrategy::Naturalness | ExpansionStrategy::NaturalnessLength)
    }
}

impl FromStr for ExpansionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "naturalness_length" && *k == ExpansionStrategy::NaturalnessLength))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown expansion strategy `{s}`")))
    }
}

impl fmt::Display for ExpansionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A path scoring function, higher is more natural.
pub type PathScorer<'a> = dyn Fn(&Path) -> Result<f64> + 'a;

/// Resources a strategy may consult.
pub struct ExpansionContext<'a> {
    pub graph: &'a Graph,
    pub table: Option<&'a EmbeddingTable>,
    pub naturalness: Option<&'a PathScorer<'a>>,
    pub seed: u64,
    /// Longest connecting path considered, in nodes.
    pub max_nodes: usize,
}

impl ExpansionContext<'_> {
    /// Sort key, larger is better; compared lexicographically.
    fn key(&self, strategy: ExpansionStrategy, path: &Path) -> Result<(f64, f64)> {
        let natural = || -> Result<f64> {
            let f = self
                .naturalness
                .ok_or_else(|| Error::InvalidArgument(format!("strategy `{strategy}` needs a model")))?;
            f(path)
        };
        Ok(match strategy {
            ExpansionStrategy::Naturalness => (natural()?, 0.0),
            ExpansionStrategy::Pairwise => {
                let table = self
                    .table
                    .ok_or_else(|| Error::InvalidArgument("pairwise strategy needs embeddings".into()))?;
                (pair_score(path, table), 0.0)
            }
            ExpansionStrategy::Length => (length_score(path, self.seed), 0.0),
            ExpansionStrategy::Random => (length_jitter(path, self.seed), 0.0),
            ExpansionStrategy::NaturalnessLength => (-(path.node_count() as f64), natural()?),
        })
    }

    /// All paths joining two distinct in-graph query terms, best first.
    pub fn ranked_paths(&self, query: &[String], strategy: ExpansionStrategy) -> Result<Vec<Path>> {
        let terms: Vec<&String> = query
            .iter()
            .filter(|t| self.graph.contains(t))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut paths = Vec::new();
        for (i, a) in terms.iter().enumerate() {
            for b in &terms[i + 1..] {
                paths.extend(self.graph.enumerate_paths(a, b, self.max_nodes)?);
            }
        }
        let mut keyed: Vec<((f64, f64), Path)> = paths
            .into_iter()
            .map(|p| Ok((self.key(strategy, &p)?, p)))
            .collect::<Result<_>>()?;
        keyed.sort_by(|(ka, _), (kb, _)| kb.partial_cmp(ka).unwrap_or(Ordering::Equal));
        Ok(keyed.into_iter().map(|(_, p)| p).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    /// Original terms followed by the added words.
    pub terms: Vec<String>,
    pub added: Vec<String>,
    /// Set when no two query terms are connected, so nothing could be added.
    pub no_paths: bool,
}

/// Appends interior words of the ranked connecting paths until `word_budget` words are added.
pub fn expand_query(
    query: &[String],
    strategy: ExpansionStrategy,
    word_budget: usize,
    ctx: &ExpansionContext<'_>,
) -> Result<Expansion> {
    let paths = if word_budget == 0 {
        Vec::new()
    } else {
        ctx.ranked_paths(query, strategy)?
    };
    let mut seen: HashSet<&str> = query.iter().map(String::as_str).collect();
    let mut added = Vec::new();
    'outer: for p in &paths {
        for v in p.interior() {
            if added.len() == word_budget {
                break 'outer;
            }
            if seen.insert(v.as_str()) {
                added.push(v.clone());
            }
        }
    }
    let mut terms = query.to_vec();
    terms.extend(added.iter().cloned());
    Ok(Expansion {
        terms,
        added,
        no_paths: word_budget > 0 && paths.is_empty(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub words_added: usize,
    pub p_at_10: f64,
    pub map: f64,
}

/// Mean P@10 and MAP over `queries` for each word budget.
pub fn expansion_series(
    index: &TfidfIndex,
    corpus: &Corpus,
    queries: &[(String, Vec<String>)],
    strategy: ExpansionStrategy,
    budgets: &[usize],
    ctx: &ExpansionContext<'_>,
) -> Result<Vec<ExpansionPoint>> {
    budgets
        .iter()
        .map(|&b| {
            let expanded: Vec<(String, Vec<String>)> = queries
                .iter()
                .map(|(qid, terms)| Ok((qid.clone(), expand_query(terms, strategy, b, ctx)?.terms)))
                .collect::<Result<_>>()?;
            let scores = evaluate_queries(index, &expanded, corpus);
            Ok(ExpansionPoint {
                words_added: b,
                p_at_10: scores.mean_p_at_10(),
                map: scores.map(),
            })
        })
        .collect()
}

// ------------------------------------------------------------------ analogy

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub query: (String, String),
    pub candidates: Vec<(String, String)>,
    pub answer: usize,
}

impl FromStr for AnalogyQuestion {
    type Err = Error;

    /// `a:b::A:B|C:D|E:F|G:H  answer`, answer as `0`-`3` or `A`-`D`.
    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed analogy line `{line}`"));
        let mut fields = line.split_whitespace();
        let body = fields.next().ok_or_else(bad)?;
        let answer_raw = fields.next().ok_or_else(bad)?;
        if fields.next().is_some() {
            return Err(bad());
        }
        let (query, rest) = body.split_once("::").ok_or_else(bad)?;
        let pair = |s: &str| -> Result<(String, String)> {
            let (a, b) = s.split_once(':').ok_or_else(bad)?;
            if a.is_empty() || b.is_empty() || b.contains(':') {
                return Err(bad());
            }
            Ok((crate::graph::normalize_label(a)?, crate::graph::normalize_label(b)?))
        };
        let candidates: Vec<(String, String)> = rest.split('|').map(pair).collect::<Result<_>>()?;
        if candidates.len() != 4 {
            return Err(bad());
        }
        let answer = match answer_raw {
            "0" | "A" | "a" => 0,
            "1" | "B" | "b" => 1,
            "2" | "C" | "c" => 2,
            "3" | "D" | "d" => 3,
            _ => return Err(bad()),
        };
        let distinct: HashSet<&(String, String)> = candidates.iter().collect();
        if distinct.len() != 4 {
            return Err(Error::InvalidArgument(format!("repeated candidate in `{line}`")));
        }
        Ok(AnalogyQuestion {
            query: pair(query)?,
            candidates,
            answer,
        })
    }
}

pub fn parse_analogies(text: &str) -> Result<Vec<AnalogyQuestion>> {
    data_lines(text)
        .map(|(line, l)| l.parse().map_err(|e: Error| Error::parse(line, e.to_string())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AnalogyOutcome {
    Answer { index: usize, score: f64 },
    Abstain,
}

fn relation_counts(xs: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for x in xs {
        *m.entry(x.as_str()).or_default() += 1;
    }
    m
}

/// `|A ∩ B| / |A ∪ B|` over relation multisets.
pub fn multiset_overlap(a: &[String], b: &[String]) -> f64 {
    let (ca, cb) = (relation_counts(a), relation_counts(b));
    let keys: HashSet<&str> = ca.keys().chain(cb.keys()).copied().collect();
    let (mut inter, mut union) = (0usize, 0usize);
    for k in keys {
        let (x, y) = (ca.get(k).copied().unwrap_or(0), cb.get(k).copied().unwrap_or(0));
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Analogy solver over graph paths.
pub struct AnalogySolver<'a> {
    pub graph: &'a Graph,
    pub score: &'a PathScorer<'a>,
}

impl AnalogySolver<'_> {
    fn direct_relations(&self, (a, b): &(String, String)) -> Vec<String> {
        self.graph.direct_steps(a, b).into_iter().map(|s| s.relation).collect()
    }

    /// Relations on the most natural 3-node paths joining the pair.
    pub fn path_relations(&self, (a, b): &(String, String), top_percent: f64) -> Result<Vec<String>> {
        if a == b || !self.graph.contains(a) || !self.graph.contains(b) {
            return Ok(Vec::new());
        }
        let mut paths = self.graph.enumerate_paths(a, b, 3)?;
        paths.retain(|p| p.node_count() == 3);
        let scores: Vec<f64> = paths.iter().map(|p| (self.score)(p)).collect::<Result<_>>()?;
        let keep = top_fraction(&scores, top_percent)?;
        Ok(keep
            .into_iter()
            .flat_map(|i| paths[i].steps.iter().map(|s| s.relation.clone()))
            .collect())
    }

    /// Relation multisets compared for the query and one candidate.
    pub fn relation_sets(
        &self,
        query: &(String, String),
        candidate: &(String, String),
        top_percent: f64,
    ) -> Result<(Vec<String>, Vec<String>)> {
        let (dq, dc) = (self.direct_relations(query), self.direct_relations(candidate));
        if !dq.is_empty() && !dc.is_empty() {
            return Ok((dq, dc));
        }
        Ok((
            self.path_relations(query, top_percent)?,
            self.path_relations(candidate, top_percent)?,
        ))
    }

    pub fn solve(&self, q: &AnalogyQuestion, top_percent: f64) -> Result<AnalogyOutcome> {
        let has_direct = !self.direct_relations(&q.query).is_empty();
        if !has_direct && self.path_relations(&q.query, 100.0)?.is_empty() {
            return Ok(AnalogyOutcome::Abstain);
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in q.candidates.iter().enumerate() {
            let (rq, rc) = self.relation_sets(&q.query, c, top_percent)?;
            let s = multiset_overlap(&rq, &rc);
            if s > 0.0 && best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        Ok(match best {
            Some((index, score)) => AnalogyOutcome::Answer { index, score },
            None => AnalogyOutcome::Abstain,
        })
    }

    /// Fraction answered correctly (abstentions count as wrong) and number answered.
    pub fn accuracy(&self, questions: &[AnalogyQuestion], top_percent: f64) -> Result<(f64, usize)> {
        if questions.is_empty() {
            return Err(Error::InvalidArgument("no analogy questions".into()));
        }
        let mut correct = 0;
        let mut answered = 0;
        for q in questions {
            if let AnalogyOutcome::Answer { index, .. } = self.solve(q, top_percent)? {
                answered += 1;
                correct += usize::from(index == q.answer);
            }
        }
        Ok((correct as f64 / questions.len() as f64, answered))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Judgment;
    use crate::graph::RelationTable;

    fn p(s: &str) -> Path {
        s.parse().unwrap()
    }

    fn graph(tsv: &str) -> Graph {
        Graph::parse(tsv, RelationTable::conceptnet()).unwrap()
    }

    fn splits(hist: &[(usize, usize, usize)]) -> Vec<OpinionSplit> {
        hist.iter()
            .flat_map(|&(n, a, b)| std::iter::repeat_n(OpinionSplit::from_votes(a, b), n))
            .collect()
    }

    #[test]
    fn agreement_extremes() {
        assert_eq!(agreement_upper_bound_from_splits(&splits(&[(5, 16, 0)])).unwrap(), 1.0);
        assert_eq!(agreement_upper_bound_from_splits(&splits(&[(5, 8, 8)])).unwrap(), 0.5);
        assert!(agreement_upper_bound_from_splits(&[]).is_err());
    }

    #[test]
    fn agreement_from_judgments() {
        let mut js = Vec::new();
        for (k, c) in [Choice::First, Choice::First, Choice::Second].iter().enumerate() {
            js.push(Judgment { pair_id: "q".into(), choice: *c, annotator: format!("a{k}"), ts: 0 });
        }
        let set = MultiResponseSet::from_judgments(js).unwrap();
        assert!((agreement_upper_bound(&set).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    fn panel(pair: &str, first: usize, second: usize) -> Vec<Judgment> {
        (0..first + second)
            .map(|k| Judgment {
                pair_id: pair.into(),
                choice: if k < first { Choice::First } else { Choice::Second },
                annotator: format!("a{k}"),
                ts: 0,
            })
            .collect()
    }

    #[test]
    fn confidence_buckets_by_hand() {
        // q1: 3/1 majority first; q2: 3/1 majority second; q3: 4/0 majority first
        let pairs = vec![
            PathPair::new("q1", p("a -[IsA]-> b"), p("a -[HasA]-> b")).unwrap(),
            PathPair::new("q2", p("c -[IsA]-> d"), p("c -[HasA]-> d")).unwrap(),
            PathPair::new("q3", p("e -[IsA]-> f"), p("e -[HasA]-> f")).unwrap(),
        ];
        let mut js = panel("q1", 3, 1);
        js.extend(panel("q2", 1, 3));
        js.extend(panel("q3", 4, 0));
        let set = MultiResponseSet::from_judgments(js).unwrap();
        let scores: HashMap<String, f64> = [
            ("a -[IsA]-> b", 1.0),
            ("a -[HasA]-> b", 0.0),
            ("c -[IsA]-> d", 0.5),
            ("c -[HasA]-> d", 0.0),
            ("e -[IsA]-> f", 2.0),
            ("e -[HasA]-> f", 0.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let out = confidence_analysis(&set, &pairs, |path| Ok(scores[&path.to_string()])).unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].split, OpinionSplit::from_votes(4, 0));
        assert_eq!((out[0].questions, out[0].correct), (1, 1));
        assert!((out[0].mean_confidence - sig(2.0)).abs() < 1e-12);
        assert_eq!(out[1].split, OpinionSplit::from_votes(3, 1));
        assert_eq!((out[1].questions, out[1].correct), (2, 1));
        assert!((out[1].mean_confidence - (sig(1.0) + sig(-0.5)) / 2.0).abs() < 1e-12);

        let flat = confidence_analysis(&set, &pairs, |_| Ok(0.3)).unwrap();
        assert!(flat.iter().all(|b| b.mean_confidence == 0.5 && b.correct == 0));
    }

    fn record(path: &str, rel: &str) -> PsRecord {
        PsRecord { path: p(path), ps_relation: rel.into() }
    }

    #[test]
    fn entropy_examples() {
        let one = [record("a -[IsA]-> b -[IsA]-> c", "HasA")];
        assert_eq!(avg_entropy(&one, &[0.0], 100.0).unwrap(), 0.0);
        let two = [record("a -[IsA]-> b -[IsA]-> c", "HasA"), record("d -[IsA]-> e -[IsA]-> f", "PartOf")];
        assert!((avg_entropy(&two, &[0.0, 0.0], 100.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(avg_entropy(&two, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn top_fraction_rounds_up() {
        assert_eq!(top_fraction(&[0.1, 0.9, 0.5], 50.0).unwrap(), vec![1, 2]);
        assert_eq!(top_fraction(&[1.0, 1.0, 1.0], 34.0).unwrap(), vec![0, 1]);
    }

    const TRIANGLE: &str = "a\tb\tIsA\t1\tomcs:1\nb\tc\tRelatedTo\t1\tomcs:1\na\tc\tHasA\t1\tomcs:1\nc\td\tIsA\t1\tomcs:1\n";

    #[test]
    fn ps_paths_on_triangle() {
        let g = graph(TRIANGLE);
        let recs = collect_ps_paths(&g, None, 3, 2, 0).unwrap();
        let texts: BTreeSet<String> = recs.iter().map(|r| format!("{}|{}", r.path, r.ps_relation)).collect();
        // every triangle corner pair qualifies; d has no direct-edge partner reachable by a 3-node path
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert!(!g.direct_steps(r.path.source(), r.path.target()).is_empty());
            assert!(!r.path.vertices.contains(&"d".to_string()), "{texts:?}");
        }
        let more = collect_ps_paths(&g, None, 3, 3, 0).unwrap();
        assert_eq!(more.len(), 3);
        assert!(more.iter().any(|r| r.path.to_string() == "a -[IsA]-> b <-[RelatedTo]-> c" && r.ps_relation == "HasA"));
        assert!(collect_ps_paths(&g, None, 3, 4, 0).is_err());
    }

    #[test]
    fn ps_paths_with_parallel_direct_edges() {
        let g = graph("a\tb\tIsA\t1\tomcs:1\nb\tc\tIsA\t1\tomcs:1\na\tc\tHasA\t1\tomcs:1\na\tc\tPartOf\t1\tomcs:1\n");
        let recs = collect_ps_paths(&g, Some(&["a", "c"].map(String::from).into()), 3, 1, 0);
        // b is outside the vocabulary, so no 3-node path survives
        assert!(recs.is_err());
        let recs = collect_ps_paths(&g, None, 3, 3, 1).unwrap();
        let ac: Vec<&PsRecord> = recs.iter().filter(|r| r.path.vertices[1] == "b").collect();
        let rels: BTreeSet<&str> = ac.iter().map(|r| r.ps_relation.as_str()).collect();
        assert_eq!(rels, BTreeSet::from(["HasA", "PartOf"]));
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("The Cat's hat, AND 42dogs!"), vec!["cat", "s", "hat", "42dogs"]);
        let mut sorted = STOP_WORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOP_WORDS);
    }

    #[test]
    fn tfidf_weights_and_ranking() {
        let idx = TfidfIndex::build([("d1", "apple apple pie"), ("d2", "apple tart"), ("d3", "cherry pie")]).unwrap();
        let w = idx.weight("d1", "apple").unwrap();
        assert!((w - 2.0 * (3.0f64 / 2.0).ln()).abs() < 1e-12);
        let hits = idx.search(&["cherry".into()], 10);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d3");
        // d1 repeats the term, so it outranks d2
        let hits = idx.search(&["apple".into()], 10);
        assert_eq!(hits.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>(), ["d1", "d2"]);
        assert!(idx.search(&["unknown".into()], 10).is_empty());
        assert!(TfidfIndex::build(Vec::<(String, String)>::new()).is_err());
        let tie = TfidfIndex::build([("z", "x y"), ("m", "x y"), ("q", "w")]).unwrap();
        let ids: Vec<String> = tie.search(&["x".into()], 10).into_iter().map(|h| h.doc_id).collect();
        assert_eq!(ids, ["m", "z"]);
    }

    #[test]
    fn precision_and_ap() {
        let ranked: Vec<String> = ["d1", "d2", "d3"].map(String::from).to_vec();
        let rel: HashSet<String> = ["d1", "d3"].map(String::from).into();
        assert!((average_precision(&ranked, &rel) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(&ranked, &HashSet::from(["zz".to_string()])), 0.0);
        let all: Vec<String> = (0..10).map(|i| format!("r{i}")).collect();
        let all_rel: HashSet<String> = all.iter().cloned().collect();
        assert_eq!(precision_at_k(&all, &all_rel, 10), 1.0);
        let map = mean_average_precision(&[(ranked.clone(), rel.clone())]).unwrap();
        assert_eq!(map, average_precision(&ranked, &rel));
    }

    #[test]
    fn corpus_parsers() {
        let q = Corpus::parse_queries("q1\tApple pie\n# comment\nq2\tcherry\n").unwrap();
        assert_eq!(q[0], ("q1".to_string(), vec!["apple".to_string(), "pie".to_string()]));
        let r = Corpus::parse_relevance("q1\td1\t1\nq1\td2\t0\n").unwrap();
        assert_eq!(r["q1"], HashSet::from(["d1".to_string()]));
        assert!(matches!(Corpus::parse_relevance("q1\td1\t2\n"), Err(Error::Parse { line: 1, .. })));
    }

    const EXPAND: &str = "\
qa\tx\tRelatedTo\t1\tomcs:1
x\tqb\tRelatedTo\t1\tomcs:1
qa\ty\tRelatedTo\t1\tomcs:1
y\tz\tRelatedTo\t1\tomcs:1
z\tqb\tRelatedTo\t1\tomcs:1
";

    #[test]
    fn expansion_orders_and_budgets() {
        let g = graph(EXPAND);
        // a scorer that prefers the longer path
        let natural = |path: &Path| Ok(path.node_count() as f64);
        let ctx = ExpansionContext { graph: &g, table: None, naturalness: Some(&natural), seed: 3, max_nodes: 4 };
        let q: Vec<String> = vec!["qa".into(), "qb".into()];
        assert!(expand_query(&q, ExpansionStrategy::Length, 0, &ctx).unwrap().added.is_empty());
        let nat = expand_query(&q, ExpansionStrategy::Naturalness, 5, &ctx).unwrap();
        assert_eq!(nat.added, ["y", "z", "x"]);
        let nl = expand_query(&q, ExpansionStrategy::NaturalnessLength, 5, &ctx).unwrap();
        assert_eq!(nl.added, ["x", "y", "z"]);
        let two = expand_query(&q, ExpansionStrategy::NaturalnessLength, 2, &ctx).unwrap();
        assert_eq!(two.added, ["x", "y"]);
        assert_eq!(two.terms, ["qa", "qb", "x", "y"]);
        let rev: Vec<String> = vec!["qb".into(), "qa".into()];
        for s in [ExpansionStrategy::Naturalness, ExpansionStrategy::Length, ExpansionStrategy::Random] {
            assert_eq!(expand_query(&q, s, 5, &ctx).unwrap().added, expand_query(&rev, s, 5, &ctx).unwrap().added);
        }
        let lonely = expand_query(&["qa".to_string(), "nowhere".to_string()], ExpansionStrategy::Length, 3, &ctx).unwrap();
        assert!(lonely.no_paths && lonely.added.is_empty());
        let no_model = ExpansionContext { naturalness: None, ..ctx };
        assert!(expand_query(&q, ExpansionStrategy::Naturalness, 3, &no_model).is_err());
    }

    #[test]
    fn analogy_parsing() {
        let q: AnalogyQuestion = "dog:animal::rose:flower|car:road|hot:cold|a:b B".parse().unwrap();
        assert_eq!(q.answer, 1);
        assert_eq!(q.query, ("dog".to_string(), "animal".to_string()));
        assert_eq!("dog:animal::a:b|c:d|e:f|g:h 3".parse::<AnalogyQuestion>().unwrap().answer, 3);
        assert!("dog:animal::a:b|c:d|e:f 0".parse::<AnalogyQuestion>().is_err());
        assert!("dog:animal::a:b|c:d|e:f|g:h E".parse::<AnalogyQuestion>().is_err());
        assert!("dog:animal::a:b|a:b|e:f|g:h 0".parse::<AnalogyQuestion>().is_err());
    }

    #[test]
    fn multiset_overlap_counts_repeats() {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(multiset_overlap(&s(&["IsA", "IsA"]), &s(&["IsA"])), 0.5);
        assert_eq!(multiset_overlap(&s(&[]), &s(&[])), 0.0);
        assert_eq!(multiset_overlap(&s(&["A", "B"]), &s(&["B", "A"])), 1.0);
    }

    #[test]
    fn analogy_direct_edges() {
        let g = graph("a\tb\tIsA\t1\tomcs:1\nc\td\tHasA\t1\tomcs:1\ne\tf\tIsA\t1\tomcs:1\ng\th\tPartOf\t1\tomcs:1\ni\tj\tAntonym\t1\tomcs:1\n");
        let flat = |_: &Path| Ok(0.0);
        let solver = AnalogySolver { graph: &g, score: &flat };
        let q: AnalogyQuestion = "a:b::c:d|e:f|g:h|i:j 1".parse().unwrap();
        assert_eq!(solver.solve(&q, 30.0).unwrap(), AnalogyOutcome::Answer { index: 1, score: 1.0 });
        let none: AnalogyQuestion = "a:b::c:d|g:h|i:j|e:zz 0".parse().unwrap();
        assert_eq!(solver.solve(&none, 30.0).unwrap(), AnalogyOutcome::Abstain);
        let unknown: AnalogyQuestion = "zz:yy::c:d|g:h|i:j|e:f 0".parse().unwrap();
        assert_eq!(solver.solve(&unknown, 30.0).unwrap(), AnalogyOutcome::Abstain);
    }
}
