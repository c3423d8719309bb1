//! Record extraction from consistent label sequences.
//!
//! Filter patterns pick record-bearing sequences by label-string
//! containment. Grammar rules then read a fixed-length style name that sits
//! between a NAME span (plus a trigger character such as 字) and a following
//! span of a given label.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_boundary, segment_passages, Corpus, Document, Passage};
use crate::dynasty::{Dynasty, DynastyVocab};
use crate::error::{Error, Result};
use crate::lattice::{consistent_sequences_with, ConsistentSequence, LatticeOptions};
use crate::lexicon::Lexicon;
use crate::natural::natural_cmp;
use crate::span::{join_labels, parse_labels, EntityLabel, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterPattern {
    pub id: String,
    pub labels: Vec<EntityLabel>,
}

impl FilterPattern {
    pub fn new(id: impl Into<String>, labels: Vec<EntityLabel>) -> Result<Self> {
        let id = id.into();
        if labels.len() < 2 {
            return Err(Error::Config(format!("pattern {id} needs at least two labels")));
        }
        if !labels.contains(&EntityLabel::Name) {
            return Err(Error::Config(format!("pattern {id} must contain NAME")));
        }
        Ok(FilterPattern { id, labels })
    }

    pub fn distinct_labels(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    /// First position where the pattern occurs contiguously in `labels`.
    pub fn find_in(&self, labels: &[EntityLabel]) -> Option<usize> {
        labels
            .windows(self.labels.len())
            .position(|w| w == self.labels.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleKind {
    Zi,
    Hao,
    None,
}

impl StyleKind {
    pub fn parse(s: &str) -> Option<StyleKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zi" | "字" => Some(StyleKind::Zi),
            "hao" | "號" => Some(StyleKind::Hao),
            "" | "none" => Some(StyleKind::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StyleKind::Zi => "zi",
            StyleKind::Hao => "hao",
            StyleKind::None => "none",
        }
    }
}

impl fmt::Display for StyleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `<anchor> trigger XX… <right_context>` capture rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub id: String,
    pub anchor_label: EntityLabel,
    pub trigger: char,
    pub capture_length: usize,
    pub right_context: EntityLabel,
    pub style_kind: StyleKind,
}

impl GrammarRule {
    pub fn zi() -> Self {
        GrammarRule {
            id: "zi".into(),
            anchor_label: EntityLabel::Name,
            trigger: '字',
            capture_length: 2,
            right_context: EntityLabel::Address,
            style_kind: StyleKind::Zi,
        }
    }

    pub fn hao() -> Self {
        GrammarRule {
            id: "hao".into(),
            anchor_label: EntityLabel::Name,
            trigger: '號',
            capture_length: 2,
            right_context: EntityLabel::Address,
            style_kind: StyleKind::Hao,
        }
    }
}

/// Patterns and grammar rules for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionConfig {
    pub patterns: Vec<FilterPattern>,
    pub rules: Vec<GrammarRule>,
}

/// The shipped configuration, also found in `config/patterns.tsv`.
pub const DEFAULT_CONFIG: &str = "\
# kind\tid\tfields
pattern\tP1\tNAME ADDRESS REIGN ENTRY
pattern\tP2\tNAME ADDRESS ENTRY REIGN
pattern\tP3\tNAME NAME ADDRESS ADDRESS
pattern\tP4\tNAME ADDRESS ADDRESS ADDRESS
# rule\tid\tanchor\ttrigger\tcapture_length\tright_context\tstyle_kind
rule\tzi\tNAME\t字\t2\tADDRESS\tzi
rule\thao\tNAME\t號\t2\tADDRESS\thao
";

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig::parse(DEFAULT_CONFIG, "<builtin>").expect("builtin config parses")
    }
}

impl ExtractionConfig {
    /// Parses `pattern` and `rule` rows (tab-separated, `#` comments).
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut patterns: Vec<FilterPattern> = Vec::new();
        let mut rules: Vec<GrammarRule> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::malformed(origin, line_no, m);
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            match cols[0] {
                "pattern" => {
                    if cols.len() != 3 {
                        return Err(bad("expected `pattern<TAB>id<TAB>labels`".into()));
                    }
                    let labels = parse_labels(cols[2]).map_err(|e| bad(e.to_string()))?;
                    let p = FilterPattern::new(cols[1], labels).map_err(|e| bad(e.to_string()))?;
                    if patterns.iter().any(|q| q.id == p.id) {
                        return Err(bad(format!("duplicate pattern id {}", p.id)));
                    }
                    patterns.push(p);
                }
                "rule" => {
                    if cols.len() != 7 {
                        return Err(bad(
                            "expected `rule<TAB>id<TAB>anchor<TAB>trigger<TAB>length<TAB>right_context<TAB>kind`"
                                .into(),
                        ));
                    }
                    let anchor_label: EntityLabel =
                        cols[2].parse().map_err(|e: crate::span::UnknownLabel| bad(e.to_string()))?;
                    if anchor_label != EntityLabel::Name {
                        return Err(bad("rules must anchor on NAME".into()));
                    }
                    let mut trig = cols[3].chars();
                    let trigger = match (trig.next(), trig.next()) {
                        (Some(c), None) if !is_boundary(c) => c,
                        _ => return Err(bad("trigger must be a single character".into())),
                    };
                    let capture_length: usize = cols[4]
                        .parse()
                        .ok()
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| bad("capture length must be a positive integer".into()))?;
                    let right_context: EntityLabel =
                        cols[5].parse().map_err(|e: crate::span::UnknownLabel| bad(e.to_string()))?;
                    let style_kind = StyleKind::parse(cols[6])
                        .filter(|k| *k != StyleKind::None)
                        .ok_or_else(|| bad(format!("unknown style kind `{}`", cols[6])))?;
                    rules.push(GrammarRule {
                        id: cols[1].to_string(),
                        anchor_label,
                        trigger,
                        capture_length,
                        right_context,
                        style_kind,
                    });
                }
                other => return Err(bad(format!("unknown row kind `{other}`"))),
            }
        }
        if patterns.is_empty() {
            return Err(Error::Config(format!("{origin}: no filter patterns")));
        }
        Ok(ExtractionConfig { patterns, rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// A sequence chosen by a filter pattern.
#[derive(Debug, Clone, Copy)]
pub struct Selected<'a> {
    pub sequence: &'a ConsistentSequence,
    pub pattern: &'a FilterPattern,
    /// Label index where the pattern first occurs.
    pub position: usize,
}

/// Keeps sequences containing some pattern. When several patterns match,
/// the one with the most distinct labels wins, then the lowest id.
pub fn pattern_select<'a>(
    sequences: &'a [ConsistentSequence],
    patterns: &'a [FilterPattern],
) -> Vec<Selected<'a>> {
    let mut out = Vec::new();
    for seq in sequences {
        let labels = seq.labels();
        let best = patterns
            .iter()
            .filter_map(|p| p.find_in(&labels).map(|pos| (p, pos)))
            .min_by(|(a, _), (b, _)| {
                b.distinct_labels()
                    .cmp(&a.distinct_labels())
                    .then_with(|| natural_cmp(&a.id, &b.id))
            });
        if let Some((pattern, position)) = best {
            out.push(Selected {
                sequence: seq,
                pattern,
                position,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedRecord {
    pub dynasty: Dynasty,
    pub name: String,
    pub style_name: Option<String>,
    pub style_kind: StyleKind,
    pub source_id: String,
    pub passage_index: usize,
    /// Character range of the name within the passage content.
    pub name_span: (usize, usize),
    /// Character range of the style-name capture within the passage content.
    pub style_span: Option<(usize, usize)>,
    pub sequence_labels: Vec<EntityLabel>,
    pub pattern_id: String,
}

impl ExtractedRecord {
    /// Stable identifier: `source:passage:start-end:dynasty`.
    pub fn key(&self, vocab: &DynastyVocab) -> String {
        format!(
            "{}:{}:{}-{}:{}",
            self.source_id,
            self.passage_index,
            self.name_span.0,
            self.name_span.1,
            vocab.chinese(self.dynasty)
        )
    }

    pub fn to_wire(&self, vocab: &DynastyVocab) -> RecordWire {
        RecordWire {
            dynasty: vocab.chinese(self.dynasty).to_string(),
            name: self.name.clone(),
            style_name: self.style_name.clone(),
            style_kind: self.style_kind,
            source_id: self.source_id.clone(),
            passage_index: self.passage_index,
            name_span: [self.name_span.0, self.name_span.1],
            style_span: self.style_span.map(|(a, b)| [a, b]),
            sequence_labels: join_labels(&self.sequence_labels, " "),
            pattern_id: self.pattern_id.clone(),
        }
    }

    pub fn from_wire(w: &RecordWire, vocab: &DynastyVocab) -> Result<Self> {
        let dynasty = vocab
            .lookup(&w.dynasty)
            .ok_or_else(|| Error::Config(format!("unknown dynasty `{}`", w.dynasty)))?;
        if w.name.is_empty() {
            return Err(Error::Config("record with empty name".into()));
        }
        Ok(ExtractedRecord {
            dynasty,
            name: w.name.clone(),
            style_name: w.style_name.clone(),
            style_kind: w.style_kind,
            source_id: w.source_id.clone(),
            passage_index: w.passage_index,
            name_span: (w.name_span[0], w.name_span[1]),
            style_span: w.style_span.map(|[a, b]| (a, b)),
            sequence_labels: parse_labels(&w.sequence_labels)
                .map_err(|e| Error::Config(e.to_string()))?,
            pattern_id: w.pattern_id.clone(),
        })
    }
}

/// JSON Lines shape of an [`ExtractedRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordWire {
    pub dynasty: String,
    pub name: String,
    pub style_name: Option<String>,
    pub style_kind: StyleKind,
    pub source_id: String,
    pub passage_index: usize,
    pub name_span: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_span: Option<[usize; 2]>,
    pub sequence_labels: String,
    pub pattern_id: String,
}

/// Emits one record per NAME span of a selected sequence, reading a style
/// name with the first rule that fires.
pub fn apply_grammar(
    selected: &Selected<'_>,
    passage: &Passage,
    rules: &[GrammarRule],
) -> Vec<ExtractedRecord> {
    let chars: Vec<char> = passage.content.chars().collect();
    let spans = &selected.sequence.spans;
    let labels = selected.sequence.labels();

    let mut out = Vec::new();
    for (i, span) in spans.iter().enumerate() {
        if span.label != EntityLabel::Name {
            continue;
        }
        let capture = rules
            .iter()
            .filter(|r| r.anchor_label == span.label)
            .find_map(|r| capture_style(r, span, spans.get(i + 1), spans, &chars).map(|c| (r, c)));
        let (style_name, style_kind, style_span) = match capture {
            Some((rule, (a, b))) => (
                Some(chars[a..b].iter().collect()),
                rule.style_kind,
                Some((a, b)),
            ),
            None => (None, StyleKind::None, None),
        };
        out.push(ExtractedRecord {
            dynasty: selected.sequence.dynasty,
            name: span.surface.clone(),
            style_name,
            style_kind,
            source_id: passage.source_id.clone(),
            passage_index: passage.index,
            name_span: (span.start, span.end),
            style_span,
            sequence_labels: labels.clone(),
            pattern_id: selected.pattern.id.clone(),
        });
    }
    out
}

fn capture_style(
    rule: &GrammarRule,
    anchor: &Span,
    next: Option<&Span>,
    spans: &[Span],
    chars: &[char],
) -> Option<(usize, usize)> {
    if chars.get(anchor.end) != Some(&rule.trigger) {
        return None;
    }
    let start = anchor.end + 1;
    let end = start + rule.capture_length;
    if end > chars.len() || chars[start..end].iter().any(|&c| is_boundary(c)) {
        return None;
    }
    if spans.iter().any(|s| s.start < end && start < s.end) {
        return None;
    }
    let next = next?;
    (next.start == end && next.label == rule.right_context).then_some((start, end))
}

/// Wraps every span of `sequence` in `<LABEL Dynasty>…</LABEL>` tags
/// (dynasty omitted for neutral labels). Untagged text passes through.
pub fn render_annotation(sequence: &ConsistentSequence, content: &str, vocab: &DynastyVocab) -> String {
    let mut out = String::with_capacity(content.len() * 2);
    let mut spans = sequence.spans.iter().peekable();
    let mut open: Option<EntityLabel> = None;
    let mut close_at = 0;
    for (pos, c) in content.chars().enumerate() {
        if open.is_some() && pos == close_at {
            out.push_str(&format!("</{}>", open.take().unwrap()));
        }
        if open.is_none() {
            if let Some(s) = spans.next_if(|s| s.start == pos) {
                if s.label.is_dynasty_bearing() {
                    out.push_str(&format!("<{} {}>", s.label, vocab.alias(sequence.dynasty)));
                } else {
                    out.push_str(&format!("<{}>", s.label));
                }
                open = Some(s.label);
                close_at = s.end;
            }
        }
        out.push(c);
    }
    if let Some(label) = open {
        out.push_str(&format!("</{label}>"));
    }
    out
}

/// Removes annotation tags, recovering the passage text.
pub fn strip_annotation(annotated: &str) -> String {
    let mut out = String::with_capacity(annotated.len());
    let mut in_tag = false;
    for c in annotated.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

/// Everything computed for one passage.
#[derive(Debug, Clone)]
pub struct PassageResult {
    pub passage: Passage,
    pub spans: Vec<Span>,
    pub sequences: Vec<ConsistentSequence>,
    /// `(sequence index, pattern id)` for each selected sequence.
    pub selected: Vec<(usize, String)>,
    pub records: Vec<ExtractedRecord>,
}

pub fn process_passage(
    passage: Passage,
    lexicon: &Lexicon,
    config: &ExtractionConfig,
    opts: &LatticeOptions,
) -> PassageResult {
    let spans = lexicon.scan(&passage);
    let sequences = consistent_sequences_with(&spans, lexicon.vocab().all(), opts);
    let chosen = pattern_select(&sequences, &config.patterns);
    let mut records = Vec::new();
    let mut selected = Vec::new();
    for sel in &chosen {
        let idx = sequences
            .iter()
            .position(|s| std::ptr::eq(s, sel.sequence))
            .expect("selected sequence comes from this passage");
        selected.push((idx, sel.pattern.id.clone()));
        records.extend(apply_grammar(sel, &passage, &config.rules));
    }
    PassageResult {
        passage,
        spans,
        sequences,
        selected,
        records,
    }
}

pub fn process_document(
    doc: &Document,
    lexicon: &Lexicon,
    config: &ExtractionConfig,
    opts: &LatticeOptions,
) -> Vec<PassageResult> {
    segment_passages(doc)
        .into_iter()
        .map(|p| process_passage(p, lexicon, config, opts))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionOutput {
    pub records: Vec<ExtractedRecord>,
    /// Label strings of every consistent sequence, for n-gram statistics.
    pub sequence_labels: Vec<Vec<EntityLabel>>,
}

/// Runs scan, lattice resolution, pattern selection and grammar rules over
/// every passage. Records are ordered by source, passage, name start and
/// dynasty.
pub fn extract_corpus(
    corpus: &Corpus,
    lexicon: &Lexicon,
    config: &ExtractionConfig,
    opts: &LatticeOptions,
) -> ExtractionOutput {
    let per_doc: Vec<Vec<PassageResult>> = corpus
        .documents()
        .par_iter()
        .map(|d| process_document(d, lexicon, config, opts))
        .collect();

    let mut out = ExtractionOutput::default();
    for results in per_doc {
        for r in results {
            out.sequence_labels
                .extend(r.sequences.iter().map(|s| s.labels()));
            out.records.extend(r.records);
        }
    }
    out.records.sort_by(|a, b| {
        a.source_id
            .cmp(&b.source_id)
            .then(a.passage_index.cmp(&b.passage_index))
            .then(a.name_span.0.cmp(&b.name_span.0))
            .then(a.dynasty.cmp(&b.dynasty))
            .then(a.name_span.1.cmp(&b.name_span.1))
    });
    out
}

/// Serializes records as JSON Lines.
pub fn records_jsonl(records: &[ExtractedRecord], vocab: &DynastyVocab) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r.to_wire(vocab)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_records_jsonl(text: &str, vocab: &DynastyVocab, origin: &str) -> Result<Vec<ExtractedRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let wire: RecordWire = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, i + 1, e.to_string()))?;
        out.push(
            ExtractedRecord::from_wire(&wire, vocab)
                .map_err(|e| Error::malformed(origin, i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}
