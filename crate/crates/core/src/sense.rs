//! Word-sense profiles and per-path sense consistency scores.
//!
//! A sense is represented by its word sense profile (synonyms, hypernyms,
//! holonyms, and definition words). Word–word similarity is cosine similarity of
//! embeddings mapped to `[0, 1]`; word–sense similarity averages it over the ten
//! profile words closest to the word.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use crate::embed::{cosine, EmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::Path;

/// Number of profile words averaged by [`SenseScorer::word_sense_sim`].
pub const PROFILE_TOP_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sense {
    pub word: String,
    pub id: u32,
    pub wsp: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SenseInventory {
    senses: BTreeMap<String, Vec<Sense>>,
}

impl SenseInventory {
    pub fn new(senses: impl IntoIterator<Item = Sense>) -> Result<Self> {
        let mut inv = SenseInventory::default();
        for sense in senses {
            inv.insert(sense, 0)?;
        }
        Ok(inv)
    }

    fn insert(&mut self, mut sense: Sense, line: usize) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        sense.wsp.retain(|w| seen.insert(w.clone()));
        if sense.wsp.is_empty() {
            return Err(Error::parse(
                line,
                format!("sense {} of `{}` has an empty profile", sense.id, sense.word),
            ));
        }
        let list = self.senses.entry(sense.word.clone()).or_default();
        if list.iter().any(|s| s.id == sense.id) {
            return Err(Error::parse(
                line,
                format!("duplicate sense {} for `{}`", sense.id, sense.word),
            ));
        }
        let pos = list.partition_point(|s| s.id < sense.id);
        list.insert(pos, sense);
        Ok(())
    }

    /// Parses `word<TAB>sense_id<TAB>w1,w2,...` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut inv = SenseInventory::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(i + 1, "expected `word<TAB>sense_id<TAB>profile`"));
            }
            let id: u32 = cols[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad sense id `{}`", cols[1])))?;
            let wsp = cols[2]
                .split(',')
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .map(String::from)
                .collect();
            inv.insert(
                Sense {
                    word: cols[0].trim().to_string(),
                    id,
                    wsp,
                },
                i + 1,
            )?;
        }
        Ok(inv)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Senses of `word` ordered by id; empty when the word is not covered.
    pub fn senses(&self, word: &str) -> &[Sense] {
        self.senses.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sense(&self, word: &str, id: u32) -> Option<&Sense> {
        self.senses(word).iter().find(|s| s.id == id)
    }

    pub fn word_count(&self) -> usize {
        self.senses.len()
    }
}

/// Chosen sense id per path vertex; `None` for words outside the inventory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseAssignment(pub Vec<Option<u32>>);

pub struct SenseScorer<'a> {
    table: &'a EmbeddingTable,
    inventory: &'a SenseInventory,
}

impl<'a> SenseScorer<'a> {
    pub fn new(table: &'a EmbeddingTable, inventory: &'a SenseInventory) -> Self {
        SenseScorer { table, inventory }
    }

    /// `(cos + 1) / 2`; out-of-vocabulary words have cosine 0.
    pub fn word_word_sim(&self, a: &str, b: &str) -> f64 {
        (cosine(&self.table.lookup(a).vector, &self.table.lookup(b).vector) + 1.0) / 2.0
    }

    pub fn word_sense_sim(&self, word: &str, sense: &Sense) -> f64 {
        let v = self.table.lookup(word).vector;
        let mut sims: Vec<f64> = sense
            .wsp
            .iter()
            .map(|w| (cosine(&v, &self.table.lookup(w).vector) + 1.0) / 2.0)
            .collect();
        sims.sort_by(|a, b| b.total_cmp(a));
        sims.truncate(PROFILE_TOP_K);
        sims.iter().sum::<f64>() / sims.len() as f64
    }

    fn neighbour_fit(&self, path: &Path, i: usize, sense: &Sense) -> f64 {
        let mut total = 0.0;
        if i > 0 {
            total += self.word_sense_sim(&path.vertices[i - 1], sense);
        }
        if i + 1 < path.vertices.len() {
            total += self.word_sense_sim(&path.vertices[i + 1], sense);
        }
        total
    }

    /// Independent per-vertex argmax of neighbour fit; ties go to the lowest sense id.
    pub fn disambiguate(&self, path: &Path) -> SenseAssignment {
        let chosen = (0..path.vertices.len())
            .map(|i| {
                let mut best: Option<(u32, f64)> = None;
                for sense in self.inventory.senses(&path.vertices[i]) {
                    let fit = self.neighbour_fit(path, i, sense);
                    if best.is_none_or(|(_, b)| fit > b) {
                        best = Some((sense.id, fit));
                    }
                }
                best.map(|(id, _)| id)
            })
            .collect();
        SenseAssignment(chosen)
    }

    fn best_fit(&self, word: &str, senses_of: &str) -> f64 {
        self.inventory
            .senses(senses_of)
            .iter()
            .map(|s| self.word_sense_sim(word, s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn chosen(&self, path: &Path, assignment: &SenseAssignment, i: usize) -> Option<&Sense> {
        assignment.0[i].and_then(|id| self.inventory.sense(&path.vertices[i], id))
    }

    /// Sense consistency of vertex `i` (0-based). Endpoints and uncovered words score 1.
    pub fn vertex_sense_score(&self, path: &Path, assignment: &SenseAssignment, i: usize) -> f64 {
        let n = path.vertices.len();
        if i == 0 || i + 1 >= n {
            return 1.0;
        }
        let Some(sense) = self.chosen(path, assignment, i) else {
            return 1.0;
        };
        let word = &path.vertices[i];
        let (left, right) = (&path.vertices[i - 1], &path.vertices[i + 1]);
        let num = self.word_sense_sim(left, sense) + self.word_sense_sim(right, sense);
        let den = self.best_fit(left, word) + self.best_fit(right, word);
        ratio(num, den)
    }

    /// Sense consistency of edge `i` (0-based), joining vertices `i` and `i + 1`.
    pub fn edge_sense_score(&self, path: &Path, assignment: &SenseAssignment, i: usize) -> f64 {
        let (Some(sa), Some(sb)) = (
            self.chosen(path, assignment, i),
            self.chosen(path, assignment, i + 1),
        ) else {
            return 1.0;
        };
        let (a, b) = (&path.vertices[i], &path.vertices[i + 1]);
        let num = self.word_sense_sim(a, sb) + self.word_sense_sim(b, sa);
        let den = self.best_fit(a, b) + self.best_fit(b, a);
        ratio(num, den)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return 1.0;
    }
    (num / den).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Direction, Step};
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse(
            "l 1 0\nr 0 1\nm 0.6 0.8\np 0.96 0.28\nq 0 1\nanti -1 0\nx 0.8 0.6\ny -0.8 0.6\n",
        )
        .unwrap()
    }

    fn path(words: &[&str]) -> Path {
        Path::new(
            words.iter().map(|w| w.to_string()).collect(),
            vec![Step::new("RelatedTo", Direction::Bidirectional); words.len() - 1],
        )
        .unwrap()
    }

    fn inventory() -> SenseInventory {
        SenseInventory::parse("m\t1\tp\nm\t2\tq\nl\t1\tl\nr\t1\tr\nsolo\t3\tm\n").unwrap()
    }

    #[test]
    fn inventory_parse_errors() {
        assert!(matches!(
            SenseInventory::parse("a\t1\tb\na\tx\tb\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(SenseInventory::parse("a\t1\t\n").is_err());
        assert!(SenseInventory::parse("a\t1\tb\na\t1\tc\n").is_err());
        let inv = SenseInventory::parse("a\t2\tb,b,c\na\t1\td\n").unwrap();
        assert_eq!(inv.senses("a")[0].id, 1);
        assert_eq!(inv.senses("a")[1].wsp, vec!["b", "c"]);
    }

    #[test]
    fn word_word_similarity() {
        let t = table();
        let inv = SenseInventory::default();
        let s = SenseScorer::new(&t, &inv);
        assert!((s.word_word_sim("l", "l") - 1.0).abs() < 1e-12);
        assert!(s.word_word_sim("l", "anti").abs() < 1e-12);
        assert!((s.word_word_sim("l", "r") - 0.5).abs() < 1e-12);
        assert!((s.word_word_sim("l", "unknown") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn word_sense_similarity() {
        let t = table();
        let inv = SenseInventory::default();
        let s = SenseScorer::new(&t, &inv);
        let one = Sense { word: "z".into(), id: 1, wsp: vec!["l".into()] };
        assert!((s.word_sense_sim("l", &one) - 1.0).abs() < 1e-12);
        // f_ww(l, ·) = 0.9, 0.5, 0.1
        let three = Sense { word: "z".into(), id: 1, wsp: vec!["x".into(), "r".into(), "y".into()] };
        assert!((s.word_sense_sim("l", &three) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn word_sense_similarity_uses_top_ten() {
        // twelve profile words on the unit circle; the two farthest from `l` are dropped
        let mut rows = vec![("l".to_string(), vec![1.0, 0.0])];
        for k in 0..12 {
            let angle = k as f64 * 0.25;
            rows.push((format!("w{k}"), vec![angle.cos(), angle.sin()]));
        }
        let t = EmbeddingTable::from_rows(rows).unwrap();
        let inv = SenseInventory::default();
        let s = SenseScorer::new(&t, &inv);
        let sense = Sense { word: "z".into(), id: 1, wsp: (0..12).map(|k| format!("w{k}")).collect() };
        // brute force over all 10-subsets: the maximum subset mean is the top-10 mean
        let f: Vec<f64> = (0..12).map(|k| ((k as f64 * 0.25).cos() + 1.0) / 2.0).collect();
        let mut best = f64::NEG_INFINITY;
        for skip_a in 0..12 {
            for skip_b in skip_a + 1..12 {
                let sum: f64 = (0..12).filter(|&k| k != skip_a && k != skip_b).map(|k| f[k]).sum();
                best = best.max(sum / 10.0);
            }
        }
        assert!((s.word_sense_sim("l", &sense) - best).abs() < 1e-12);
    }

    #[test]
    fn disambiguation() {
        let t = table();
        let inv = inventory();
        let s = SenseScorer::new(&t, &inv);
        // neighbours: l favours sense 1 (0.98 vs 0.5), r favours sense 2 (1.0 vs 0.64)
        let a = s.disambiguate(&path(&["l", "m", "r"]));
        assert_eq!(a.0, vec![Some(1), Some(1), Some(1)]);
        // both neighbours r → sense 2
        let b = s.disambiguate(&path(&["r", "m", "q"]));
        assert_eq!(b.0[1], Some(2));
        let c = s.disambiguate(&path(&["solo", "nowhere"]));
        assert_eq!(c.0, vec![Some(3), None]);
    }

    #[test]
    fn vertex_scores() {
        let t = table();
        let inv = inventory();
        let s = SenseScorer::new(&t, &inv);
        let p = path(&["l", "m", "r"]);
        let a = s.disambiguate(&p);
        assert_eq!(s.vertex_sense_score(&p, &a, 0), 1.0);
        assert_eq!(s.vertex_sense_score(&p, &a, 2), 1.0);
        // (0.98 + 0.64) / (0.98 + 1.0)
        let want = (0.98 + 0.64) / (0.98 + 1.0);
        assert!((s.vertex_sense_score(&p, &a, 1) - want).abs() < 1e-9);

        let single = path(&["m", "solo", "l"]);
        let a = s.disambiguate(&single);
        assert!((s.vertex_sense_score(&single, &a, 1) - 1.0).abs() < 1e-12);
        let missing = path(&["m", "nowhere", "l"]);
        let a = s.disambiguate(&missing);
        assert_eq!(s.vertex_sense_score(&missing, &a, 1), 1.0);
    }

    #[test]
    fn edge_scores() {
        let t = table();
        let inv = inventory();
        let s = SenseScorer::new(&t, &inv);
        let p = path(&["l", "m", "r"]);
        let a = s.disambiguate(&p);
        assert!((s.edge_sense_score(&p, &a, 0) - 1.0).abs() < 1e-12);
        // f_ws(m, r-sense) = 0.9; f_ws(r, m sense 1) = 0.64; best for r is sense 2 = 1.0
        let want = (0.9 + 0.64) / (0.9 + 1.0);
        assert!((s.edge_sense_score(&p, &a, 1) - want).abs() < 1e-9);

        let both_single = path(&["l", "r"]);
        let a = s.disambiguate(&both_single);
        assert!((s.edge_sense_score(&both_single, &a, 0) - 1.0).abs() < 1e-12);
        let missing = path(&["l", "nowhere"]);
        let a = s.disambiguate(&missing);
        assert_eq!(s.edge_sense_score(&missing, &a, 0), 1.0);
    }

    fn random_setup() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<(usize, Vec<usize>)>, Vec<usize>)> {
        let vectors = prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 8);
        let senses = prop::collection::vec((0usize..8, prop::collection::vec(0usize..8, 1..5)), 0..12);
        let walk = prop::collection::vec(0usize..8, 2..6);
        (vectors, senses, walk)
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval((vectors, senses, walk) in random_setup()) {
            let t = EmbeddingTable::from_rows(
                vectors.into_iter().enumerate().map(|(i, v)| (format!("w{i}"), v)),
            ).unwrap();
            let inv = SenseInventory::new(senses.into_iter().enumerate().map(|(k, (w, wsp))| Sense {
                word: format!("w{w}"),
                id: k as u32,
                wsp: wsp.into_iter().map(|x| format!("w{x}")).collect(),
            })).unwrap();
            let mut words: Vec<String> = walk.iter().map(|w| format!("w{w}")).collect();
            words.dedup();
            prop_assume!(words.len() >= 2);
            let p = Path::new(
                words.clone(),
                vec![Step::new("RelatedTo", Direction::Bidirectional); words.len() - 1],
            ).unwrap();
            let s = SenseScorer::new(&t, &inv);
            let a = s.disambiguate(&p);
            for i in 0..p.node_count() {
                let v = s.vertex_sense_score(&p, &a, i);
                prop_assert!((0.0..=1.0).contains(&v));
            }
            for i in 0..p.node_count() - 1 {
                let e = s.edge_sense_score(&p, &a, i);
                prop_assert!((0.0..=1.0).contains(&e));
            }
            // reversal picks the same senses
            let mut rev = s.disambiguate(&p.reversed()).0;
            rev.reverse();
            prop_assert_eq!(rev, a.0);
        }
    }
}
