use std::collections::HashMap;
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a relation reads the same in both directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Directionality {
    Directed,
    Symmetric,
}

impl FromStr for Directionality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "directed" => Ok(Directionality::Directed),
            "symmetric" => Ok(Directionality::Symmetric),
            other => Err(Error::InvalidArgument(format!(
                "directionality must be `directed` or `symmetric`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Directionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directionality::Directed => f.write_str("directed"),
            Directionality::Symmetric => f.write_str("symmetric"),
        }
    }
}

const CONCEPTNET_RELATIONS: [&str; 46] = [
    "RelatedTo",
    "FormOf",
    "IsA",
    "PartOf",
    "HasA",
    "UsedFor",
    "CapableOf",
    "AtLocation",
    "Causes",
    "HasSubevent",
    "HasFirstSubevent",
    "HasLastSubevent",
    "HasPrerequisite",
    "HasProperty",
    "MotivatedByGoal",
    "ObstructedBy",
    "Desires",
    "CreatedBy",
    "Synonym",
    "Antonym",
    "DistinctFrom",
    "DerivedFrom",
    "SymbolOf",
    "DefinedAs",
    "MannerOf",
    "LocatedNear",
    "HasContext",
    "SimilarTo",
    "EtymologicallyRelatedTo",
    "EtymologicallyDerivedFrom",
    "CausesDesire",
    "MadeOf",
    "ReceivesAction",
    "InstanceOf",
    "Entails",
    "NotDesires",
    "NotUsedFor",
    "NotCapableOf",
    "NotHasProperty",
    "dbpedia/genre",
    "dbpedia/influencedBy",
    "dbpedia/knownFor",
    "dbpedia/occupation",
    "dbpedia/language",
    "dbpedia/field",
    "dbpedia/capital",
];

const SYMMETRIC_RELATIONS: [&str; 6] = [
    "RelatedTo",
    "Synonym",
    "Antonym",
    "DistinctFrom",
    "SimilarTo",
    "EtymologicallyRelatedTo",
];

/// Ordered relation vocabulary. The order fixes the relation one-hot layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationTable {
    names: Vec<String>,
    classes: Vec<Directionality>,
    index: HashMap<String, u16>,
}

impl RelationTable {
    pub fn new(entries: impl IntoIterator<Item = (String, Directionality)>) -> Result<Self> {
        let mut table = RelationTable {
            names: Vec::new(),
            classes: Vec::new(),
            index: HashMap::new(),
        };
        for (name, class) in entries {
            if name.is_empty() {
                return Err(Error::InvalidArgument("empty relation name".into()));
            }
            if table.index.contains_key(&name) {
                return Err(Error::InvalidArgument(format!("duplicate relation `{name}`")));
            }
            let id = u16::try_from(table.names.len())
                .map_err(|_| Error::InvalidArgument("too many relations".into()))?;
            table.index.insert(name.clone(), id);
            table.names.push(name);
            table.classes.push(class);
        }
        Ok(table)
    }

    /// The 46 ConceptNet relations with the default symmetric partition.
    pub fn conceptnet() -> Self {
        Self::new(CONCEPTNET_RELATIONS.iter().map(|&name| {
            let class = if SYMMETRIC_RELATIONS.contains(&name) {
                Directionality::Symmetric
            } else {
                Directionality::Directed
            };
            (name.to_string(), class)
        }))
        .expect("built-in relation table is well formed")
    }

    /// Parses `name<TAB>directionality` rows. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let name = cols.next().unwrap_or_default().trim();
            let class = cols
                .next()
                .ok_or_else(|| Error::parse(i + 1, "expected `name<TAB>directionality`"))?;
            if cols.next().is_some() {
                return Err(Error::parse(i + 1, "too many columns"));
            }
            let class = class
                .parse::<Directionality>()
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            entries.push((name.to_string(), class));
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, class) in self.names.iter().zip(&self.classes) {
            out.push_str(name);
            out.push('\t');
            out.push_str(&class.to_string());
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u16> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u16) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn directionality(&self, id: u16) -> Directionality {
        self.classes[id as usize]
    }

    pub fn is_symmetric(&self, name: &str) -> Option<bool> {
        self.id(name)
            .map(|id| self.directionality(id) == Directionality::Symmetric)
    }
}

impl Default for RelationTable {
    fn default() -> Self {
        Self::conceptnet()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conceptnet_table_has_46_relations() {
        let table = RelationTable::conceptnet();
        assert_eq!(table.len(), 46);
        assert_eq!(table.is_symmetric("RelatedTo"), Some(true));
        assert_eq!(table.is_symmetric("IsA"), Some(false));
        assert_eq!(table.is_symmetric("Nope"), None);
    }

    #[test]
    fn parse_round_trips() {
        let table = RelationTable::conceptnet();
        let reparsed = RelationTable::parse(&table.to_tsv()).unwrap();
        assert_eq!(table, reparsed);
    }

    #[test]
    fn parse_reports_line() {
        let err = RelationTable::parse("IsA\tdirected\nHasA\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = RelationTable::parse("IsA\tsideways\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_relation_rejected() {
        assert!(RelationTable::parse("IsA\tdirected\nIsA\tdirected\n").is_err());
    }
}
