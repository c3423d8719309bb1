use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynasty::{Dynasty, DynastySet};

/// Entity categories used for annotation.
///
/// Variant order is alphabetical so the derived `Ord` gives the lexicographic
/// label order used when ranking label strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityLabel {
    Address,
    Entry,
    Name,
    Office,
    Reign,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 5] = [
        EntityLabel::Address,
        EntityLabel::Entry,
        EntityLabel::Name,
        EntityLabel::Office,
        EntityLabel::Reign,
    ];

    /// Names, offices and reign periods are tied to dynasties.
    pub fn is_dynasty_bearing(self) -> bool {
        matches!(
            self,
            EntityLabel::Name | EntityLabel::Office | EntityLabel::Reign
        )
    }

    /// Tie-break priority between overlapping readings: higher wins.
    pub fn priority(self) -> u8 {
        match self {
            EntityLabel::Name => 4,
            EntityLabel::Office => 3,
            EntityLabel::Reign => 2,
            EntityLabel::Entry => 1,
            EntityLabel::Address => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::Address => "ADDRESS",
            EntityLabel::Entry => "ENTRY",
            EntityLabel::Name => "NAME",
            EntityLabel::Office => "OFFICE",
            EntityLabel::Reign => "REIGN",
        }
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown entity label `{}`", self.0)
    }
}

impl FromStr for EntityLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('<').trim_end_matches('>');
        match t.to_ascii_uppercase().as_str() {
            "ADDRESS" => Ok(EntityLabel::Address),
            "ENTRY" => Ok(EntityLabel::Entry),
            "NAME" => Ok(EntityLabel::Name),
            "OFFICE" => Ok(EntityLabel::Office),
            "REIGN" | "REIGN PERIOD" | "REIGN_PERIOD" => Ok(EntityLabel::Reign),
            _ => Err(UnknownLabel(s.to_string())),
        }
    }
}

/// Parses a whitespace-, `+`- or `<..>`-separated label string.
pub fn parse_labels(s: &str) -> Result<Vec<EntityLabel>, UnknownLabel> {
    let normalized = s.replace("REIGN PERIOD", "REIGN").replace("><", " ");
    normalized
        .split(|c: char| c.is_whitespace() || c == '+')
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

pub fn join_labels(labels: &[EntityLabel], sep: &str) -> String {
    labels
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(sep)
}

/// A labeled lexicon match inside a passage. Offsets are character offsets
/// into the passage content; `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    /// Empty exactly when the label is dynasty-neutral.
    pub dynasties: DynastySet,
    pub surface: String,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when this span is admissible under `dynasty`.
    pub fn valid_in(&self, dynasty: Dynasty) -> bool {
        !self.label.is_dynasty_bearing() || self.dynasties.contains(dynasty)
    }

    /// Scan order: start ascending, end descending, then label priority.
    pub fn scan_order(a: &Span, b: &Span) -> Ordering {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then(b.label.priority().cmp(&a.label.priority()))
            .then(a.surface.cmp(&b.surface))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parsing() {
        assert_eq!(
            parse_labels("<NAME><ADDRESS><REIGN PERIOD><ENTRY>").unwrap(),
            vec![
                EntityLabel::Name,
                EntityLabel::Address,
                EntityLabel::Reign,
                EntityLabel::Entry
            ]
        );
        assert_eq!(parse_labels("NAME+OFFICE").unwrap().len(), 2);
        assert!(parse_labels("NAME PLACE").is_err());
    }

    #[test]
    fn dynasty_bearing_labels() {
        let bearing: Vec<_> = EntityLabel::ALL
            .into_iter()
            .filter(|l| l.is_dynasty_bearing())
            .collect();
        assert_eq!(
            bearing,
            vec![EntityLabel::Name, EntityLabel::Office, EntityLabel::Reign]
        );
    }

    #[test]
    fn lexicographic_label_order() {
        let mut names: Vec<&str> = EntityLabel::ALL.iter().map(|l| l.as_str()).collect();
        let derived = names.clone();
        names.sort();
        assert_eq!(names, derived);
    }
}
