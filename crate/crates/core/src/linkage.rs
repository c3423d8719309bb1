//! Linking extracted records to a reference biographical table.
//!
//! Each record is compared field by field (dynasty, name, style name)
//! against its best candidate and assigned a type code from the flag triple:
//!
//! | type | dynasty | name | style |
//! |------|---------|------|-------|
//! | 1    | ○       | ○    | ○     |
//! | 2    | ○       | ○    | x     |
//! | 3    | x       | ○    | ○     |
//! | 4    | ○       | x    | ○     |
//! | 5    | x       | ○    | x     |
//! | 6    | x       | x    | ○     |
//! | 7    | ○       | x    | x     |
//! | 8    | x       | x    | x     |

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{segment_passages, Corpus, Passage};
use crate::dynasty::{Dynasty, DynastyVocab};
use crate::error::{Error, Result};
use crate::extract::{ExtractedRecord, RecordWire, StyleKind};
use crate::natural::natural_cmp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceRecord {
    pub person_id: String,
    pub dynasty: Dynasty,
    pub name: String,
    pub style_name: Option<String>,
    pub style_kind: StyleKind,
}

/// Reference rows indexed by name and by style name.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTable {
    records: Vec<ReferenceRecord>,
    by_name: HashMap<String, Vec<usize>>,
    by_style: HashMap<String, Vec<usize>>,
}

impl ReferenceTable {
    pub fn new(records: Vec<ReferenceRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut by_style: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.person_id.as_str()) {
                return Err(Error::DuplicatePerson(r.person_id.clone()));
            }
            by_name.entry(r.name.clone()).or_default().push(i);
            if let Some(s) = &r.style_name {
                by_style.entry(s.clone()).or_default().push(i);
            }
        }
        Ok(ReferenceTable {
            records,
            by_name,
            by_style,
        })
    }

    /// Parses `person_id<TAB>dynasty<TAB>name<TAB>style_name<TAB>style_kind`.
    /// A leading header row starting with `person_id` is skipped.
    pub fn parse(text: &str, origin: &str, vocab: &DynastyVocab) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if records.is_empty() && line.starts_with("person_id\t") {
                continue;
            }
            let bad = |m: String| Error::malformed(origin, line_no, m);
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(3..=5).contains(&cols.len()) {
                return Err(bad(format!("expected 5 tab-separated columns, found {}", cols.len())));
            }
            let person_id = cols[0];
            if person_id.is_empty() {
                return Err(bad("empty person_id".into()));
            }
            if let Some(first) = seen.insert(person_id.to_string(), line_no) {
                return Err(bad(format!("duplicate person_id {person_id} (first on line {first})")));
            }
            let dynasty = vocab
                .lookup(cols[1])
                .ok_or_else(|| bad(format!("unknown dynasty `{}`", cols[1])))?;
            let name = cols[2];
            if name.is_empty() {
                return Err(bad("empty name".into()));
            }
            let style_name = cols.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string());
            let kind_col = cols.get(4).copied().unwrap_or("");
            let style_kind = StyleKind::parse(kind_col)
                .ok_or_else(|| bad(format!("unknown style kind `{kind_col}`")))?;
            if style_name.is_some() != (style_kind != StyleKind::None) {
                return Err(bad("style_name and style_kind must be both present or both empty".into()));
            }
            records.push(ReferenceRecord {
                person_id: person_id.to_string(),
                dynasty,
                name: name.to_string(),
                style_name,
                style_kind,
            });
        }
        ReferenceTable::new(records)
    }

    pub fn load(path: &Path, vocab: &DynastyVocab) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), vocab)
    }

    pub fn records(&self) -> &[ReferenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows sharing the name, or failing that, the style name.
    pub fn candidates(&self, name: &str, style_name: Option<&str>) -> Vec<&ReferenceRecord> {
        let idx = self
            .by_name
            .get(name)
            .or_else(|| style_name.and_then(|s| self.by_style.get(s)));
        idx.map(|v| v.iter().map(|&i| &self.records[i]).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchFlags {
    pub dynasty: bool,
    pub name: bool,
    pub style: bool,
}

impl MatchFlags {
    pub fn score(self) -> u8 {
        self.dynasty as u8 + self.name as u8 + self.style as u8
    }

    pub fn type_code(self) -> u8 {
        match (self.dynasty, self.name, self.style) {
            (true, true, true) => 1,
            (true, true, false) => 2,
            (false, true, true) => 3,
            (true, false, true) => 4,
            (false, true, false) => 5,
            (false, false, true) => 6,
            (true, false, false) => 7,
            (false, false, false) => 8,
        }
    }

    pub fn from_type_code(code: u8) -> Option<MatchFlags> {
        let (dynasty, name, style) = match code {
            1 => (true, true, true),
            2 => (true, true, false),
            3 => (false, true, true),
            4 => (true, false, true),
            5 => (false, true, false),
            6 => (false, false, true),
            7 => (true, false, false),
            8 => (false, false, false),
            _ => return None,
        };
        Some(MatchFlags {
            dynasty,
            name,
            style,
        })
    }
}

fn compare(record: &ExtractedRecord, reference: &ReferenceRecord) -> MatchFlags {
    let style = match (&record.style_name, &reference.style_name) {
        (Some(a), Some(b)) => a == b && record.style_kind == reference.style_kind,
        _ => false,
    };
    MatchFlags {
        dynasty: record.dynasty == reference.dynasty,
        name: record.name == reference.name,
        style,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchClassification {
    pub record: ExtractedRecord,
    pub matched_person_id: Option<String>,
    pub flags: MatchFlags,
    pub type_code: u8,
}

/// Picks the candidate with the most matching fields (ties: smallest
/// person id) and classifies the record against it.
pub fn classify(record: &ExtractedRecord, table: &ReferenceTable) -> MatchClassification {
    let best = table
        .candidates(&record.name, record.style_name.as_deref())
        .into_iter()
        .map(|c| (compare(record, c), c))
        .min_by(|(fa, a), (fb, b)| {
            fb.score()
                .cmp(&fa.score())
                .then_with(|| natural_cmp(&a.person_id, &b.person_id))
        });
    let (flags, matched_person_id) = match best {
        Some((f, c)) => (f, Some(c.person_id.clone())),
        None => (
            MatchFlags {
                dynasty: false,
                name: false,
                style: false,
            },
            None,
        ),
    };
    MatchClassification {
        record: record.clone(),
        matched_person_id,
        flags,
        type_code: flags.type_code(),
    }
}

/// JSON Lines shape of a classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationWire {
    pub key: String,
    pub record: RecordWire,
    pub matched_person_id: Option<String>,
    pub flags: MatchFlags,
    pub type_code: u8,
}

impl MatchClassification {
    pub fn to_wire(&self, vocab: &DynastyVocab) -> ClassificationWire {
        ClassificationWire {
            key: self.record.key(vocab),
            record: self.record.to_wire(vocab),
            matched_person_id: self.matched_person_id.clone(),
            flags: self.flags,
            type_code: self.type_code,
        }
    }

    pub fn from_wire(w: &ClassificationWire, vocab: &DynastyVocab) -> Result<Self> {
        let flags_code = w.flags.type_code();
        if flags_code != w.type_code {
            return Err(Error::Config(format!(
                "type_code {} disagrees with flags (type {flags_code})",
                w.type_code
            )));
        }
        Ok(MatchClassification {
            record: ExtractedRecord::from_wire(&w.record, vocab)?,
            matched_person_id: w.matched_person_id.clone(),
            flags: w.flags,
            type_code: w.type_code,
        })
    }
}

pub fn classifications_jsonl(items: &[MatchClassification], vocab: &DynastyVocab) -> String {
    let mut out = String::new();
    for c in items {
        out.push_str(&serde_json::to_string(&c.to_wire(vocab)).expect("classification serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_classifications_jsonl(
    text: &str,
    vocab: &DynastyVocab,
    origin: &str,
) -> Result<Vec<MatchClassification>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let wire: ClassificationWire = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, i + 1, e.to_string()))?;
        out.push(
            MatchClassification::from_wire(&wire, vocab)
                .map_err(|e| Error::malformed(origin, i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeRow {
    pub type_code: u8,
    pub flags: MatchFlags,
    pub count: usize,
    pub proportion: String,
}

/// Counts and proportions per type code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeReport {
    pub total: usize,
    pub rows: Vec<TypeRow>,
}

/// Formats `count / total` as a percentage: one decimal at or above 10%,
/// three significant figures below.
pub fn format_proportion(count: usize, total: usize) -> String {
    if total == 0 || count == 0 {
        return "0.00%".to_string();
    }
    let p = count as f64 * 100.0 / total as f64;
    if p >= 10.0 {
        return format!("{p:.1}%");
    }
    let exponent = p.log10().floor() as i32;
    let mut decimals = (2 - exponent).max(0);
    let scale = 10f64.powi(decimals);
    if (p * scale).round() / scale >= 10f64.powi(exponent + 1) {
        // Rounding carried into the next power of ten.
        decimals -= 1;
    }
    let decimals = decimals as usize;
    format!("{p:.decimals$}%")
}

pub fn report(classifications: &[MatchClassification]) -> TypeReport {
    let total = classifications.len();
    let mut counts = [0usize; 8];
    for c in classifications {
        counts[(c.type_code - 1) as usize] += 1;
    }
    let rows = (1..=8u8)
        .map(|t| TypeRow {
            type_code: t,
            flags: MatchFlags::from_type_code(t).expect("codes 1-8 are valid"),
            count: counts[(t - 1) as usize],
            proportion: format_proportion(counts[(t - 1) as usize], total),
        })
        .collect();
    TypeReport { total, rows }
}

fn mark(b: bool) -> &'static str {
    if b {
        "○"
    } else {
        "x"
    }
}

impl TypeReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("type\tdynasty\tname\tstyle_name\tquan\tprop\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.type_code,
                mark(r.flags.dynasty),
                mark(r.flags.name),
                mark(r.flags.style),
                r.count,
                r.proportion
            );
        }
        let _ = writeln!(out, "total\t\t\t\t{}\t", self.total);
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("Analysis of {} extracted records\n\n", self.total);
        out.push_str("Type  Dynasty  Name  Style  Quan.    Prop.\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<4}  {:<7}  {:<4}  {:<5}  {:>5}  {:>7}",
                r.type_code,
                mark(r.flags.dynasty),
                mark(r.flags.name),
                mark(r.flags.style),
                r.count,
                r.proportion
            );
        }
        out
    }
}

/// Passage text around a record's name, with highlight offsets relative to
/// `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewContext {
    pub text: String,
    /// Offset of `text` within the passage content.
    pub window_start: usize,
    pub name_span: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_span: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub key: String,
    pub record: RecordWire,
    pub matched_person_id: Option<String>,
    pub flags: MatchFlags,
    pub type_code: u8,
    pub context_available: bool,
    pub context: Option<ReviewContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewBatch {
    pub context_chars: usize,
    pub items: Vec<ReviewItem>,
}

pub fn review_context(
    passage: &Passage,
    name_span: (usize, usize),
    style_span: Option<(usize, usize)>,
    context_chars: usize,
) -> Option<ReviewContext> {
    let len = passage.len();
    if name_span.0 >= name_span.1 || name_span.1 > len {
        return None;
    }
    let lo = name_span.0.saturating_sub(context_chars);
    let hi = (name_span.1 + context_chars).min(len);
    let text: String = passage.content.chars().skip(lo).take(hi - lo).collect();
    let style_span = style_span
        .filter(|&(a, b)| a >= lo && b <= hi && a < b)
        .map(|(a, b)| [a - lo, b - lo]);
    Some(ReviewContext {
        text,
        window_start: lo,
        name_span: [name_span.0 - lo, name_span.1 - lo],
        style_span,
    })
}

/// Records needing expert review (types 2–8, plus type 1 on request) with
/// their surrounding text.
pub fn export_review_batch(
    classifications: &[MatchClassification],
    corpus: &Corpus,
    context_chars: usize,
    include_type1: bool,
    vocab: &DynastyVocab,
) -> ReviewBatch {
    let mut passages: BTreeMap<&str, Option<Vec<Passage>>> = BTreeMap::new();
    let mut items = Vec::new();
    for c in classifications {
        if c.type_code == 1 && !include_type1 {
            continue;
        }
        let r = &c.record;
        let doc_passages = passages
            .entry(r.source_id.as_str())
            .or_insert_with(|| corpus.get(&r.source_id).map(segment_passages));
        let context = doc_passages
            .as_ref()
            .and_then(|ps| ps.get(r.passage_index))
            .and_then(|p| review_context(p, r.name_span, r.style_span, context_chars));
        items.push(ReviewItem {
            key: r.key(vocab),
            record: r.to_wire(vocab),
            matched_person_id: c.matched_person_id.clone(),
            flags: c.flags,
            type_code: c.type_code,
            context_available: context.is_some(),
            context,
        });
    }
    ReviewBatch {
        context_chars,
        items,
    }
}
