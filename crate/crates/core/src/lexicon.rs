//! Dynasty-tagged entity dictionaries and exhaustive matching over passages.
//!
//! Lexicon files are TSV: `surface<TAB>label<TAB>dynasties`, where the
//! dynasty list is comma-separated and may use Chinese names or their
//! romanized aliases. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};

use crate::corpus::{is_boundary, Passage};
use crate::dynasty::{DynastySet, DynastyVocab};
use crate::error::{Error, Result};
use crate::span::{EntityLabel, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub surface: String,
    pub label: EntityLabel,
    pub dynasties: DynastySet,
}

/// Row and entry counts from a load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub rows: usize,
    pub entries: usize,
}

/// Accumulates rows, merging duplicate `(surface, label)` pairs by
/// dynasty-set union.
#[derive(Debug, Clone)]
pub struct LexiconBuilder {
    vocab: DynastyVocab,
    entries: BTreeMap<(String, EntityLabel), DynastySet>,
    rows: usize,
}

impl LexiconBuilder {
    pub fn new(vocab: DynastyVocab) -> Self {
        LexiconBuilder {
            vocab,
            entries: BTreeMap::new(),
            rows: 0,
        }
    }

    pub fn vocab(&self) -> &DynastyVocab {
        &self.vocab
    }

    /// Adds one entry. Dynasty tokens are resolved against the vocabulary.
    pub fn add(&mut self, surface: &str, label: EntityLabel, dynasties: &[&str]) -> Result<()> {
        let mut set = DynastySet::EMPTY;
        for token in dynasties {
            let d = self
                .vocab
                .lookup(token)
                .ok_or_else(|| Error::Config(format!("unknown dynasty `{token}`")))?;
            set.insert(d);
        }
        self.add_entry(surface, label, set)
            .map_err(Error::Config)
    }

    fn add_entry(
        &mut self,
        surface: &str,
        label: EntityLabel,
        set: DynastySet,
    ) -> std::result::Result<(), String> {
        if surface.is_empty() {
            return Err("empty surface".into());
        }
        if surface.chars().any(is_boundary) {
            return Err(format!("surface `{surface}` contains a delimiter"));
        }
        match (label.is_dynasty_bearing(), set.is_empty()) {
            (true, true) => return Err(format!("{label} entry `{surface}` needs dynasties")),
            (false, false) => {
                return Err(format!("{label} entry `{surface}` must not list dynasties"))
            }
            _ => {}
        }
        self.rows += 1;
        let slot = self
            .entries
            .entry((surface.to_string(), label))
            .or_default();
        *slot = slot.union(set);
        Ok(())
    }

    /// Parses TSV text. `origin` names the file in error messages.
    pub fn add_tsv(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&cols.len()) {
                return Err(Error::malformed(
                    origin,
                    line_no,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let surface = cols[0].trim();
            let label: EntityLabel = cols[1]
                .parse()
                .map_err(|e: crate::span::UnknownLabel| {
                    Error::malformed(origin, line_no, e.to_string())
                })?;
            let mut set = DynastySet::EMPTY;
            let list = cols.get(2).copied().unwrap_or("");
            for token in list
                .split([',', '，', '、'])
                .map(str::trim)
                .filter(|t| !t.is_empty())
            {
                let d = self.vocab.lookup(token).ok_or_else(|| {
                    Error::malformed(origin, line_no, format!("unknown dynasty `{token}`"))
                })?;
                set.insert(d);
            }
            self.add_entry(surface, label, set)
                .map_err(|m| Error::malformed(origin, line_no, m))?;
        }
        Ok(())
    }

    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.add_tsv(&text, &path.display().to_string())
    }

    pub fn build(self) -> Lexicon {
        let entries: Vec<LexiconEntry> = self
            .entries
            .into_iter()
            .map(|((surface, label), dynasties)| LexiconEntry {
                surface,
                label,
                dynasties,
            })
            .collect();

        // One automaton pattern per distinct surface; each pattern maps to
        // every entry sharing that surface.
        let mut surfaces: Vec<String> = Vec::new();
        let mut by_surface: Vec<Vec<usize>> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let pid = *index.entry(e.surface.as_str()).or_insert_with(|| {
                surfaces.push(e.surface.clone());
                by_surface.push(Vec::new());
                surfaces.len() - 1
            });
            by_surface[pid].push(i);
        }
        let automaton = AhoCorasickBuilder::new()
            .match_kind(MatchKind::Standard)
            .build(&surfaces)
            .expect("lexicon automaton fits in memory");

        Lexicon {
            stats: LoadStats {
                rows: self.rows,
                entries: entries.len(),
            },
            vocab: self.vocab,
            entries,
            by_surface,
            automaton,
        }
    }
}

/// An immutable, indexed dictionary.
#[derive(Debug, Clone)]
pub struct Lexicon {
    vocab: DynastyVocab,
    entries: Vec<LexiconEntry>,
    by_surface: Vec<Vec<usize>>,
    automaton: AhoCorasick,
    stats: LoadStats,
}

impl Lexicon {
    /// Loads and merges lexicon files.
    pub fn load(paths: &[impl AsRef<Path>], vocab: DynastyVocab) -> Result<Lexicon> {
        let mut builder = LexiconBuilder::new(vocab);
        for p in paths {
            builder.add_file(p.as_ref())?;
        }
        Ok(builder.build())
    }

    pub fn from_tsv(text: &str, vocab: DynastyVocab) -> Result<Lexicon> {
        let mut builder = LexiconBuilder::new(vocab);
        builder.add_tsv(text, "<inline>")?;
        Ok(builder.build())
    }

    pub fn vocab(&self) -> &DynastyVocab {
        &self.vocab
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    pub fn get(&self, surface: &str, label: EntityLabel) -> Option<&LexiconEntry> {
        self.entries
            .binary_search_by(|e| (e.surface.as_str(), e.label).cmp(&(surface, label)))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Every occurrence of every entry in `text`, nested and overlapping
    /// matches included, sorted by start ascending then end descending.
    pub fn scan_text(&self, text: &str) -> Vec<Span> {
        if self.entries.is_empty() || text.is_empty() {
            return Vec::new();
        }
        // byte offset -> char offset, with one extra slot for the end.
        let mut char_at = vec![0usize; text.len() + 1];
        let mut n = 0;
        for (b, _) in text.char_indices() {
            char_at[b] = n;
            n += 1;
        }
        char_at[text.len()] = n;

        let mut spans = Vec::new();
        for m in self.automaton.find_overlapping_iter(text) {
            let (start, end) = (char_at[m.start()], char_at[m.end()]);
            for &ei in &self.by_surface[m.pattern().as_usize()] {
                let e = &self.entries[ei];
                spans.push(Span {
                    start,
                    end,
                    label: e.label,
                    dynasties: e.dynasties,
                    surface: e.surface.clone(),
                });
            }
        }
        spans.sort_by(Span::scan_order);
        spans
    }

    pub fn scan(&self, passage: &Passage) -> Vec<Span> {
        self.scan_text(&passage.content)
    }
}
