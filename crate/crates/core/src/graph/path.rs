use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an edge is traversed along a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Bidirectional,
}

impl Direction {
    /// Position in the (forward, backward, bidirectional) one-hot.
    pub fn one_hot_index(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Backward => 1,
            Direction::Bidirectional => 2,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
            Direction::Bidirectional => Direction::Bidirectional,
        }
    }

    pub fn arrow_glyph(self) -> char {
        match self {
            Direction::Forward => '→',
            Direction::Backward => '←',
            Direction::Bidirectional => '↔',
        }
    }
}

/// One relation hop of a path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub relation: String,
    pub direction: Direction,
}

impl Step {
    pub fn new(relation: impl Into<String>, direction: Direction) -> Self {
        Step {
            relation: relation.into(),
            direction,
        }
    }
}

/// Sequence of (relation, direction) labels along a path.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathType(pub Vec<Step>);

impl fmt::Display for PathType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}{}", step.direction.arrow_glyph(), step.relation)?;
        }
        f.write_str(")")
    }
}

/// Alternating vertex/edge sequence `v_1 e_1 v_2 ... e_{n-1} v_n`.
///
/// Paths carry labels rather than graph ids so datasets stay readable without
/// the graph they were sampled from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<String>,
    pub steps: Vec<Step>,
}

impl Path {
    pub fn new(vertices: Vec<String>, steps: Vec<Step>) -> Result<Self> {
        let path = Path { vertices, steps };
        path.check_shape()?;
        Ok(path)
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least 2 vertices".into()));
        }
        if self.steps.len() + 1 != self.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "path has {} vertices but {} edges",
                self.vertices.len(),
                self.steps.len()
            )));
        }
        Ok(())
    }

    /// Number of nodes `n`.
    pub fn node_count(&self) -> usize {
        self.vertices.len()
    }

    /// Length of the alternating item sequence, `2n - 1`.
    pub fn item_count(&self) -> usize {
        2 * self.vertices.len() - 1
    }

    pub fn source(&self) -> &str {
        &self.vertices[0]
    }

    pub fn target(&self) -> &str {
        self.vertices.last().expect("non-empty path")
    }

    pub fn interior(&self) -> &[String] {
        let n = self.vertices.len();
        if n <= 2 {
            &[]
        } else {
            &self.vertices[1..n - 1]
        }
    }

    pub fn path_type(&self) -> PathType {
        PathType(self.steps.clone())
    }

    /// Stored (start, end) of the `i`-th edge given its traversal direction.
    /// Bidirectional edges are stored with the lexicographically smaller end first.
    pub fn edge_endpoints(&self, i: usize) -> (&str, &str) {
        let a = self.vertices[i].as_str();
        let b = self.vertices[i + 1].as_str();
        match self.steps[i].direction {
            Direction::Forward => (a, b),
            Direction::Backward => (b, a),
            Direction::Bidirectional => {
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        }
    }

    pub fn reversed(&self) -> Path {
        let vertices = self.vertices.iter().rev().cloned().collect();
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| Step::new(s.relation.clone(), s.direction.reversed()))
            .collect();
        Path { vertices, steps }
    }

    pub fn has_repeated_vertex(&self) -> bool {
        let mut seen: Vec<&str> = self.vertices.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.windows(2).any(|w| w[0] == w[1])
    }

    /// Rendering with glyph arrows, e.g. `health ↔RelatedTo↔ care →IsA→ work`.
    pub fn pretty(&self) -> String {
        let mut out = self.vertices[0].clone();
        for (step, v) in self.steps.iter().zip(&self.vertices[1..]) {
            let (l, r) = match step.direction {
                Direction::Forward => ('→', '→'),
                Direction::Backward => ('←', '←'),
                Direction::Bidirectional => ('↔', '↔'),
            };
            out.push_str(&format!(" {l}{}{r} {v}", step.relation));
        }
        out
    }
}

/// ASCII notation: `email -[UsedFor]-> communication <-[UsedFor]- telephone`,
/// with `<-[Rel]->` for bidirectional hops.
impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.vertices[0])?;
        for (step, v) in self.steps.iter().zip(&self.vertices[1..]) {
            match step.direction {
                Direction::Forward => write!(f, " -[{}]-> {v}", step.relation)?,
                Direction::Backward => write!(f, " <-[{}]- {v}", step.relation)?,
                Direction::Bidirectional => write!(f, " <-[{}]-> {v}", step.relation)?,
            }
        }
        Ok(())
    }
}

fn parse_arrow(token: &str) -> Option<Step> {
    let (left_back, rest) = if let Some(rest) = token.strip_prefix("<-[") {
        (true, rest)
    } else {
        let rest = token.strip_prefix("-[")?;
        (false, rest)
    };
    let (relation, right_fwd) = if let Some(rel) = rest.strip_suffix("]->") {
        (rel, true)
    } else {
        let rel = rest.strip_suffix("]-")?;
        (rel, false)
    };
    if relation.is_empty() {
        return None;
    }
    let direction = match (left_back, right_fwd) {
        (false, true) => Direction::Forward,
        (true, false) => Direction::Backward,
        (true, true) => Direction::Bidirectional,
        (false, false) => return None,
    };
    Some(Step::new(relation, direction))
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("malformed path `{s}`")));
        }
        let mut vertices = Vec::new();
        let mut steps = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            if i % 2 == 0 {
                vertices.push(super::normalize_label(tok)?);
            } else {
                let step = parse_arrow(tok)
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed arrow `{tok}`")))?;
                steps.push(step);
            }
        }
        Path::new(vertices, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notation_round_trip() {
        let text = "email -[UsedFor]-> communication <-[UsedFor]- telephone <-[RelatedTo]-> phone";
        let path: Path = text.parse().unwrap();
        assert_eq!(path.node_count(), 4);
        assert_eq!(path.steps[1].direction, Direction::Backward);
        assert_eq!(path.steps[2].direction, Direction::Bidirectional);
        assert_eq!(path.to_string(), text);
    }

    #[test]
    fn malformed_notation() {
        assert!("a".parse::<Path>().is_err());
        assert!("a -[IsA]- b".parse::<Path>().is_err());
        assert!("a =IsA=> b".parse::<Path>().is_err());
        assert!("a -[IsA]-> b -[IsA]->".parse::<Path>().is_err());
    }

    #[test]
    fn reversal_flips_directions() {
        let path: Path = "a -[IsA]-> b <-[RelatedTo]-> c".parse().unwrap();
        let rev = path.reversed();
        assert_eq!(rev.to_string(), "c <-[RelatedTo]-> b <-[IsA]- a");
        assert_eq!(rev.reversed(), path);
        assert_eq!(path.edge_endpoints(0), rev.edge_endpoints(1));
    }
}
