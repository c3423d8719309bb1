//! Dynasty vocabulary and compact dynasty sets.
//!
//! Dynasties are configuration: a [`DynastyVocab`] lists them in chronological
//! order, and a [`Dynasty`] is an ordinal into that list. Comparisons between
//! dynasties follow the vocabulary order.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Upper bound on vocabulary size, set by the width of [`DynastySet`].
pub const MAX_DYNASTIES: usize = 64;

/// An ordinal into a [`DynastyVocab`]. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dynasty(u8);

impl Dynasty {
    pub fn from_index(index: usize) -> Self {
        assert!(index < MAX_DYNASTIES, "dynasty index {index} out of range");
        Dynasty(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of dynasties stored as a 64-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DynastySet(u64);

impl DynastySet {
    pub const EMPTY: DynastySet = DynastySet(0);

    pub fn single(d: Dynasty) -> Self {
        DynastySet(1 << d.0)
    }

    pub fn from_bits(bits: u64) -> Self {
        DynastySet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, d: Dynasty) -> bool {
        self.0 & (1 << d.0) != 0
    }

    pub fn insert(&mut self, d: Dynasty) {
        self.0 |= 1 << d.0;
    }

    pub fn union(self, other: DynastySet) -> DynastySet {
        DynastySet(self.0 | other.0)
    }

    pub fn intersection(self, other: DynastySet) -> DynastySet {
        DynastySet(self.0 & other.0)
    }

    /// Members in chronological order.
    pub fn iter(self) -> impl Iterator<Item = Dynasty> {
        (0..MAX_DYNASTIES)
            .filter(move |&i| self.0 & (1 << i) != 0)
            .map(|i| Dynasty(i as u8))
    }
}

impl FromIterator<Dynasty> for DynastySet {
    fn from_iter<I: IntoIterator<Item = Dynasty>>(iter: I) -> Self {
        let mut set = DynastySet::EMPTY;
        for d in iter {
            set.insert(d);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct DynastyName {
    chinese: String,
    alias: String,
}

/// The ordered list of dynasties known to a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynastyVocab {
    names: Vec<DynastyName>,
}

impl Default for DynastyVocab {
    fn default() -> Self {
        Self::from_pairs(&[
            ("唐", "Tang"),
            ("宋", "Song"),
            ("元", "Yuan"),
            ("明", "Ming"),
            ("清", "Qing"),
            ("民國", "Republic"),
        ])
        .expect("builtin dynasty table is valid")
    }
}

impl DynastyVocab {
    /// Builds a vocabulary from `(chinese, alias)` pairs in chronological order.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self> {
        if pairs.len() > MAX_DYNASTIES {
            return Err(Error::Config(format!(
                "at most {MAX_DYNASTIES} dynasties are supported, got {}",
                pairs.len()
            )));
        }
        let mut names: Vec<DynastyName> = Vec::with_capacity(pairs.len());
        for (chinese, alias) in pairs {
            let (chinese, alias) = (chinese.trim(), alias.trim());
            if chinese.is_empty() || alias.is_empty() {
                return Err(Error::Config("empty dynasty name".into()));
            }
            if names
                .iter()
                .any(|n| n.chinese == chinese || n.alias.eq_ignore_ascii_case(alias))
            {
                return Err(Error::Config(format!("duplicate dynasty {chinese}/{alias}")));
            }
            names.push(DynastyName {
                chinese: chinese.to_string(),
                alias: alias.to_string(),
            });
        }
        Ok(DynastyVocab { names })
    }

    /// Parses a vocabulary file: one `chinese<TAB>alias` row per dynasty,
    /// oldest first. `#` lines and blank lines are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(c), Some(a), None) => pairs.push((c.to_string(), a.to_string())),
                _ => {
                    return Err(Error::Malformed {
                        file: origin.to_string(),
                        line: i + 1,
                        message: "expected `chinese<TAB>alias`".into(),
                    })
                }
            }
        }
        let borrowed: Vec<(&str, &str)> =
            pairs.iter().map(|(c, a)| (c.as_str(), a.as_str())).collect();
        Self::from_pairs(&borrowed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// All dynasties, oldest first.
    pub fn all(&self) -> impl Iterator<Item = Dynasty> + '_ {
        (0..self.names.len()).map(Dynasty::from_index)
    }

    pub fn all_set(&self) -> DynastySet {
        self.all().collect()
    }

    /// Resolves a Chinese name or a (case-insensitive) alias.
    pub fn lookup(&self, token: &str) -> Option<Dynasty> {
        let token = token.trim();
        self.names
            .iter()
            .position(|n| n.chinese == token || n.alias.eq_ignore_ascii_case(token))
            .map(Dynasty::from_index)
    }

    /// Canonical (Chinese) name.
    pub fn chinese(&self, d: Dynasty) -> &str {
        &self.names[d.index()].chinese
    }

    /// Romanized alias, used in annotation tags.
    pub fn alias(&self, d: Dynasty) -> &str {
        &self.names[d.index()].alias
    }

    pub fn display(&self, d: Dynasty) -> DisplayDynasty<'_> {
        DisplayDynasty { vocab: self, d }
    }
}

pub struct DisplayDynasty<'a> {
    vocab: &'a DynastyVocab,
    d: Dynasty,
}

impl fmt::Display for DisplayDynasty<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.vocab.chinese(self.d))
    }
}
