//! Pairwise questionnaires, quality control, judgment storage and splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Direction, Graph, Path, Step};
use crate::model::Example;

pub const GENUINE_ITEMS: usize = 60;
pub const QC_ITEMS: usize = 13;
pub const QUESTIONNAIRE_ITEMS: usize = GENUINE_ITEMS + QC_ITEMS;

const QC_GOOD_PATHS: &str = include_str!("../data/qc_good_paths.txt");

/// Which of the two displayed or stored paths was preferred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

impl Choice {
    /// `+1` for `First`, `-1` for `Second`.
    pub fn sign(self) -> f64 {
        match self {
            Choice::First => 1.0,
            Choice::Second => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Choice::First => Choice::Second,
            Choice::Second => Choice::First,
        }
    }
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Choice::First),
            "second" => Ok(Choice::Second),
            _ => Err(Error::InvalidArgument(format!("choice must be `first` or `second`, got `{s}`"))),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::First => "first",
            Choice::Second => "second",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPair {
    pub id: String,
    pub first: Path,
    pub second: Path,
}

impl PathPair {
    pub fn new(id: impl Into<String>, first: Path, second: Path) -> Result<Self> {
        let id = id.into();
        if first == second {
            return Err(Error::InvalidArgument(format!("pair `{id}` compares a path with itself")));
        }
        Ok(PathPair { id, first, second })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub pair_id: String,
    pub choice: Choice,
    pub annotator: String,
    /// Seconds since the Unix epoch.
    pub ts: u64,
}

/// Judgments grouped by pair, at most one per annotator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiResponseSet {
    questions: BTreeMap<String, Vec<Judgment>>,
}

impl MultiResponseSet {
    pub fn from_judgments(judgments: impl IntoIterator<Item = Judgment>) -> Result<Self> {
        let mut set = Self::default();
        for j in judgments {
            set.add(j)?;
        }
        Ok(set)
    }

    pub fn add(&mut self, judgment: Judgment) -> Result<()> {
        let list = self.questions.entry(judgment.pair_id.clone()).or_default();
        if list.iter().any(|j| j.annotator == judgment.annotator) {
            return Err(Error::InvalidArgument(format!(
                "annotator `{}` answered pair `{}` twice",
                judgment.annotator, judgment.pair_id
            )));
        }
        list.push(judgment);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn responses(&self, pair_id: &str) -> &[Judgment] {
        self.questions.get(pair_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn questions(&self) -> impl Iterator<Item = (&str, &[Judgment])> {
        self.questions.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.questions.values().flatten()
    }

    /// Votes for (first, second) on one pair.
    pub fn votes(&self, pair_id: &str) -> (usize, usize) {
        let first = self
            .responses(pair_id)
            .iter()
            .filter(|j| j.choice == Choice::First)
            .count();
        (first, self.responses(pair_id).len() - first)
    }
}

/// One questionnaire item as stored on the server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionnaireItem {
    /// Opaque id shown to the annotator.
    pub id: String,
    pub left: Path,
    pub right: Path,
    /// Underlying pair; `left` is its second path when `swapped`.
    pub pair_id: String,
    pub swapped: bool,
    /// Displayed side holding the good path, for quality-control items.
    pub qc_answer: Option<Choice>,
}

impl QuestionnaireItem {
    /// Maps a displayed choice back onto the underlying pair's order.
    pub fn pair_choice(&self, displayed: Choice) -> Choice {
        if self.swapped {
            displayed.flipped()
        } else {
            displayed
        }
    }
}

/// What the annotator receives: no pair ids, no quality-control marks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredItem {
    pub id: String,
    pub left: Path,
    pub right: Path,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub item_id: String,
    pub choice: Choice,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Questionnaire {
    pub seed: u64,
    pub items: Vec<QuestionnaireItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    Incomplete { missing: usize },
    UnknownItem { item_id: String },
    DuplicateAnswer { item_id: String },
    QcFailed { wrong: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// The shipped list of obviously natural paths for quality-control items.
pub fn default_qc_good_paths() -> Vec<Path> {
    QC_GOOD_PATHS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().expect("shipped quality-control paths parse"))
        .collect()
}

/// Random words joined by random relations. At least one hop is guaranteed not
/// to exist in `graph`.
pub fn random_bad_path(graph: &Graph, nodes: usize, rng: &mut impl Rng) -> Result<Path> {
    if nodes < 2 || graph.concept_count() < nodes {
        return Err(Error::Insufficient {
            what: "concepts for a random path",
            requested: nodes,
            found: graph.concept_count(),
        });
    }
    let labels: Vec<&str> = graph.concepts().collect();
    let relations = graph.relations();
    for _ in 0..1000 {
        let vertices: Vec<String> = index::sample(rng, labels.len(), nodes)
            .into_iter()
            .map(|i| labels[i].to_string())
            .collect();
        let steps: Vec<Step> = (0..nodes - 1)
            .map(|_| {
                let r = rng.gen_range(0..relations.len()) as u16;
                let direction = if relations.is_symmetric(relations.name(r)) == Some(true) {
                    Direction::Bidirectional
                } else if rng.gen_bool(0.5) {
                    Direction::Forward
                } else {
                    Direction::Backward
                };
                Step::new(relations.name(r), direction)
            })
            .collect();
        let path = Path::new(vertices, steps)?;
        if (0..path.steps.len()).any(|i| graph.path_edge(&path, i).is_err()) {
            return Ok(path);
        }
    }
    Err(Error::InvalidArgument("graph too dense to draw a synthetic path".into()))
}

/// 60 genuine pairs plus 13 quality-control pairs, shuffled, sides randomized.
pub fn build_questionnaire(
    genuine_pool: &[PathPair],
    good_paths: &[Path],
    graph: &Graph,
    seed: u64,
) -> Result<Questionnaire> {
    if genuine_pool.len() < GENUINE_ITEMS {
        return Err(Error::Insufficient {
            what: "genuine pairs",
            requested: GENUINE_ITEMS,
            found: genuine_pool.len(),
        });
    }
    if good_paths.len() < QC_ITEMS {
        return Err(Error::Insufficient {
            what: "curated good paths",
            requested: QC_ITEMS,
            found: good_paths.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut staged: Vec<(PathPair, Option<Choice>)> = Vec::with_capacity(QUESTIONNAIRE_ITEMS);
    for i in index::sample(&mut rng, genuine_pool.len(), GENUINE_ITEMS) {
        staged.push((genuine_pool[i].clone(), None));
    }
    for (k, i) in index::sample(&mut rng, good_paths.len(), QC_ITEMS).into_iter().enumerate() {
        let good = good_paths[i].clone();
        let bad = random_bad_path(graph, good.node_count(), &mut rng)?;
        let pair = PathPair::new(format!("qc-{seed}-{k}"), good, bad)?;
        staged.push((pair, Some(Choice::First)));
    }
    staged.shuffle(&mut rng);
    let items = staged
        .into_iter()
        .enumerate()
        .map(|(pos, (pair, qc))| {
            let swapped = rng.gen_bool(0.5);
            let (left, right) = if swapped {
                (pair.second, pair.first)
            } else {
                (pair.first, pair.second)
            };
            QuestionnaireItem {
                id: format!("{seed}-{pos}"),
                left,
                right,
                pair_id: pair.id,
                swapped,
                qc_answer: qc.map(|c| if swapped { c.flipped() } else { c }),
            }
        })
        .collect();
    Ok(Questionnaire { seed, items })
}

impl Questionnaire {
    pub fn delivered(&self) -> Vec<DeliveredItem> {
        self.items
            .iter()
            .map(|it| DeliveredItem {
                id: it.id.clone(),
                left: it.left.clone(),
                right: it.right.clone(),
            })
            .collect()
    }

    pub fn qc_count(&self) -> usize {
        self.items.iter().filter(|it| it.qc_answer.is_some()).count()
    }

    /// Judgments in underlying pair order, one per item.
    pub fn judgments(&self, answers: &[Answer], annotator: &str, ts: u64) -> Result<Vec<Judgment>> {
        let by_id: HashMap<&str, Choice> = answers.iter().map(|a| (a.item_id.as_str(), a.choice)).collect();
        self.items
            .iter()
            .map(|it| {
                let displayed = by_id
                    .get(it.id.as_str())
                    .ok_or_else(|| Error::InvalidArgument(format!("item `{}` unanswered", it.id)))?;
                Ok(Judgment {
                    pair_id: it.pair_id.clone(),
                    choice: it.pair_choice(*displayed),
                    annotator: annotator.to_string(),
                    ts,
                })
            })
            .collect()
    }
}

/// Accepts a complete answer sheet iff every quality-control item picks the good path.
pub fn validate_response(questionnaire: &Questionnaire, answers: &[Answer]) -> Verdict {
    let items: HashMap<&str, &QuestionnaireItem> =
        questionnaire.items.iter().map(|it| (it.id.as_str(), it)).collect();
    let mut seen = HashSet::new();
    for a in answers {
        if !items.contains_key(a.item_id.as_str()) {
            return Verdict::Reject(RejectReason::UnknownItem { item_id: a.item_id.clone() });
        }
        if !seen.insert(a.item_id.as_str()) {
            return Verdict::Reject(RejectReason::DuplicateAnswer { item_id: a.item_id.clone() });
        }
    }
    if seen.len() < items.len() {
        return Verdict::Reject(RejectReason::Incomplete {
            missing: items.len() - seen.len(),
        });
    }
    let wrong = answers
        .iter()
        .filter(|a| matches!(items[a.item_id.as_str()].qc_answer, Some(good) if good != a.choice))
        .count();
    if wrong > 0 {
        Verdict::Reject(RejectReason::QcFailed { wrong })
    } else {
        Verdict::Accept
    }
}

/// Distinct random pairs over `paths`, each with random side order.
pub fn sample_pairs(paths: &[Path], count: usize, seed: u64, id_prefix: &str) -> Result<Vec<PathPair>> {
    let mut distinct: Vec<&Path> = paths.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let n = distinct.len();
    let available = n * n.saturating_sub(1) / 2;
    if count > available {
        return Err(Error::Insufficient {
            what: "distinct path pairs",
            requested: count,
            found: available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct.shuffle(&mut rng);
    let mut taken = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j || !taken.insert((i.min(j), i.max(j))) {
            continue;
        }
        let id = format!("{id_prefix}{}", out.len());
        out.push(PathPair::new(id, distinct[i].clone(), distinct[j].clone())?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub train_paths: usize,
    pub test_paths: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
}

impl SplitCounts {
    /// 8,000/2,000 paths yielding 40,000/1,000 pairs.
    pub const SCIENCE: SplitCounts = SplitCounts {
        train_paths: 8000,
        test_paths: 2000,
        train_pairs: 40000,
        test_pairs: 1000,
    };
}

/// Pairs to be judged, drawn from disjoint path pools.
pub fn sample_disjoint_pairs(paths: &[Path], counts: SplitCounts, seed: u64) -> Result<(Vec<PathPair>, Vec<PathPair>)> {
    let distinct: Vec<&Path> = paths.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let need = counts.train_paths + counts.test_paths;
    if distinct.len() < need {
        return Err(Error::Insufficient {
            what: "distinct paths",
            requested: need,
            found: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<Path> = index::sample(&mut rng, distinct.len(), need)
        .into_iter()
        .map(|i| distinct[i].clone())
        .collect();
    let (train_paths, test_paths) = chosen.split_at(counts.train_paths);
    let train = sample_pairs(train_paths, counts.train_pairs, rng.gen(), "train-")?;
    let test = sample_pairs(test_paths, counts.test_pairs, rng.gen(), "test-")?;
    Ok((train, test))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitSide {
    pub pairs: Vec<PathPair>,
    pub judgments: Vec<Judgment>,
}

/// Path-disjoint split of judged pairs. Distinct paths are shuffled and the
/// first `train_fraction` go to training; a pair is kept only when both of its
/// paths fall on the same side.
pub fn split_train_test(
    pairs: &[PathPair],
    judgments: &[Judgment],
    train_fraction: f64,
    seed: u64,
) -> Result<(SplitSide, SplitSide)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument("train fraction must lie in [0, 1]".into()));
    }
    let mut distinct: Vec<&Path> = pairs
        .iter()
        .flat_map(|p| [&p.first, &p.second])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if distinct.len() < 2 {
        return Err(Error::Insufficient {
            what: "distinct paths",
            requested: 2,
            found: distinct.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    distinct.shuffle(&mut rng);
    let cut = (train_fraction * distinct.len() as f64).round() as usize;
    let in_train: HashSet<&Path> = distinct[..cut].iter().copied().collect();
    let mut side_of: HashMap<&str, bool> = HashMap::new();
    let (mut train, mut test) = (SplitSide::default(), SplitSide::default());
    for p in pairs {
        let (a, b) = (in_train.contains(&p.first), in_train.contains(&p.second));
        if a != b {
            continue;
        }
        side_of.insert(&p.id, a);
        if a { &mut train } else { &mut test }.pairs.push(p.clone());
    }
    for j in judgments {
        match side_of.get(j.pair_id.as_str()) {
            Some(true) => train.judgments.push(j.clone()),
            Some(false) => test.judgments.push(j.clone()),
            None if pairs.iter().any(|p| p.id == j.pair_id) => {}
            None => return Err(Error::UnknownPair(j.pair_id.clone())),
        }
    }
    Ok((train, test))
}

/// Paths referenced by at least one pair on each side.
pub fn path_overlap(a: &[PathPair], b: &[PathPair]) -> usize {
    let left: HashSet<&Path> = a.iter().flat_map(|p| [&p.first, &p.second]).collect();
    let right: HashSet<&Path> = b.iter().flat_map(|p| [&p.first, &p.second]).collect();
    left.intersection(&right).count()
}

/// Distinct paths plus one training example per judgment.
pub fn training_examples(pairs: &[PathPair], judgments: &[Judgment]) -> Result<(Vec<Path>, Vec<Example>)> {
    let by_id: HashMap<&str, &PathPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut paths: Vec<Path> = Vec::new();
    let mut index_of: HashMap<Path, usize> = HashMap::new();
    let mut intern = |p: &Path| -> usize {
        *index_of.entry(p.clone()).or_insert_with(|| {
            paths.push(p.clone());
            paths.len() - 1
        })
    };
    let mut examples = Vec::with_capacity(judgments.len());
    for j in judgments {
        let pair = by_id
            .get(j.pair_id.as_str())
            .ok_or_else(|| Error::UnknownPair(j.pair_id.clone()))?;
        examples.push(Example {
            first: intern(&pair.first),
            second: intern(&pair.second),
            label: j.choice,
        });
    }
    Ok((paths, examples))
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn parse_json_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::parse(i + 1, e.to_string()))
        })
        .collect()
}

pub fn write_pairs(pairs: &[PathPair]) -> String {
    json_lines(pairs)
}

/// One JSON record per line; `#` lines are skipped.
pub fn read_pairs(text: &str) -> Result<Vec<PathPair>> {
    let mut ids = HashSet::new();
    parse_json_lines::<PathPair>(text)?
        .into_iter()
        .map(|(line, p)| {
            p.first.check_shape().map_err(|e| Error::parse(line, e.to_string()))?;
            p.second.check_shape().map_err(|e| Error::parse(line, e.to_string()))?;
            if !ids.insert(p.id.clone()) {
                return Err(Error::parse(line, format!("duplicate pair id `{}`", p.id)));
            }
            Ok(p)
        })
        .collect()
}

pub fn write_judgments(judgments: &[Judgment]) -> String {
    json_lines(judgments)
}

/// Parses judgment records, rejecting any that name a pair outside `known` when given.
pub fn read_judgments(text: &str, known: Option<&[PathPair]>) -> Result<Vec<Judgment>> {
    let ids: Option<HashSet<&str>> = known.map(|ps| ps.iter().map(|p| p.id.as_str()).collect());
    parse_json_lines::<Judgment>(text)?
        .into_iter()
        .map(|(_, j)| match &ids {
            Some(ids) if !ids.contains(j.pair_id.as_str()) => Err(Error::UnknownPair(j.pair_id)),
            _ => Ok(j),
        })
        .collect()
}

/// Append-only judgment log. Writers are serialized by a lock; readers get a
/// copy taken under the same lock.
#[derive(Debug, Default)]
pub struct JudgmentStore {
    inner: Mutex<Vec<Judgment>>,
    file: Option<PathBuf>,
}

impl JudgmentStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing records from `path` (if present) and appends new ones to it.
    pub fn open(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let existing = match std::fs::read_to_string(&path) {
            Ok(text) => read_judgments(&text, None)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        Ok(JudgmentStore {
            inner: Mutex::new(existing),
            file: Some(path),
        })
    }

    /// Appends a batch atomically with respect to other writers.
    pub fn append(&self, batch: Vec<Judgment>) -> Result<()> {
        let mut guard = self.inner.lock().expect("judgment store lock");
        if let Some(path) = &self.file {
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            f.write_all(write_judgments(&batch).as_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
        guard.extend(batch);
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<Judgment> {
        self.inner.lock().expect("judgment store lock").clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("judgment store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
