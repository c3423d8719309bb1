//! Ambiguity lattice over scanned spans.
//!
//! A passage's exhaustive span set admits many labelings. Two routes turn it
//! into dynasty-consistent label sequences:
//!
//! * [`enumerate_candidates`] lists every maximal non-overlapping selection,
//!   expanded over every per-span dynasty choice. Exponential; capped.
//! * [`consistent_sequences`] projects onto one dynasty at a time, applies
//!   the longest-match preference, and selects greedily. Polynomial; this is
//!   the production path.
//!
//! [`verify_against_enumeration`] checks the second against a brute-force
//! filter over the first.

use serde::Serialize;

use crate::dynasty::{Dynasty, DynastyVocab};
use crate::span::{EntityLabel, Span};

pub const DEFAULT_CAP: usize = 4096;

/// Knobs for the production path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeOptions {
    /// Minimum number of dynasty-bearing spans that must agree on the
    /// committed dynasty. A lone name is not evidence of its dynasty; a name
    /// corroborated by an office or reign period is.
    pub min_dynasty_evidence: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions {
            min_dynasty_evidence: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSequence {
    pub spans: Vec<Span>,
    /// Parallel to `spans`; `None` for dynasty-neutral spans.
    pub choices: Vec<Option<Dynasty>>,
}

impl CandidateSequence {
    /// The single dynasty shared by every choice, if there is one.
    pub fn common_dynasty(&self) -> Option<Dynasty> {
        let mut it = self.choices.iter().flatten();
        let first = *it.next()?;
        it.all(|&d| d == first).then_some(first)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Enumeration {
    pub candidates: Vec<CandidateSequence>,
    /// Set when more candidates existed than the cap allowed.
    pub truncated: bool,
}

/// Every maximal non-overlapping span selection, expanded over dynasty
/// choices, in lexicographic order of span starts and then dynasty order.
pub fn enumerate_candidates(spans: &[Span], cap: usize) -> Enumeration {
    let mut sorted = spans.to_vec();
    sorted.sort_by(Span::scan_order);
    sorted.dedup();

    let mut out = Enumeration::default();
    if cap == 0 {
        out.truncated = !sorted.is_empty();
        return out;
    }
    let mut chosen = Vec::new();
    maximal_selections(&sorted, 0, &mut chosen, &mut |selection| {
        expand_dynasties(&sorted, selection, cap, &mut out)
    });
    out
}

/// Depth-first walk over maximal independent sets of the interval graph.
///
/// With `frontier` the end of the last chosen span, the next span may be any
/// span starting at or after the frontier, provided no other such span fits
/// entirely before it. A selection is complete when nothing starts at or
/// after the frontier. Each maximal set is produced exactly once.
/// `visit` returns false to stop the walk.
fn maximal_selections(
    spans: &[Span],
    frontier: usize,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let open = spans
        .iter()
        .enumerate()
        .filter(|(_, s)| s.start >= frontier);
    let Some(min_end) = open.clone().map(|(_, s)| s.end).min() else {
        return visit(chosen);
    };
    for (i, s) in open {
        if s.start >= min_end {
            continue;
        }
        chosen.push(i);
        let go_on = maximal_selections(spans, s.end, chosen, visit);
        chosen.pop();
        if !go_on {
            return false;
        }
    }
    true
}

fn expand_dynasties(
    spans: &[Span],
    selection: &[usize],
    cap: usize,
    out: &mut Enumeration,
) -> bool {
    let options: Vec<Vec<Option<Dynasty>>> = selection
        .iter()
        .map(|&i| {
            let s = &spans[i];
            if s.label.is_dynasty_bearing() {
                s.dynasties.iter().map(Some).collect()
            } else {
                vec![None]
            }
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        // A dynasty-bearing span with no dynasties has no reading.
        return true;
    }
    let picked: Vec<Span> = selection.iter().map(|&i| spans[i].clone()).collect();
    let mut odometer = vec![0usize; options.len()];
    loop {
        if out.candidates.len() == cap {
            out.truncated = true;
            return false;
        }
        out.candidates.push(CandidateSequence {
            spans: picked.clone(),
            choices: odometer
                .iter()
                .zip(&options)
                .map(|(&k, opts)| opts[k])
                .collect(),
        });
        // Advance, rightmost digit fastest.
        let mut pos = odometer.len();
        loop {
            if pos == 0 {
                return true;
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < options[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

fn strength_order(a: &Span, b: &Span) -> std::cmp::Ordering {
    b.len()
        .cmp(&a.len())
        .then(b.label.priority().cmp(&a.label.priority()))
        .then(a.start.cmp(&b.start))
        .then(a.surface.cmp(&b.surface))
}

/// Projects the span set onto `dynasty` and removes overlaps.
///
/// Dynasty-bearing spans not valid in `dynasty` are dropped. A span is then
/// shadowed when an overlapping span of the same label is longer. Remaining
/// overlaps between different labels keep the longer span, then the higher
/// label priority (NAME > OFFICE > REIGN > ENTRY > ADDRESS), then the
/// smaller start. The result is non-overlapping and in scan order.
pub fn resolve_longest_match(spans: &[Span], dynasty: Dynasty) -> Vec<Span> {
    let restricted: Vec<&Span> = spans.iter().filter(|s| s.valid_in(dynasty)).collect();

    let mut survivors: Vec<&Span> = restricted
        .iter()
        .copied()
        .filter(|s| {
            !restricted
                .iter()
                .any(|t| t.label == s.label && t.overlaps(s) && t.len() > s.len())
        })
        .collect();
    survivors.sort_by(|a, b| strength_order(a, b));

    let mut kept: Vec<Span> = Vec::new();
    for s in survivors {
        if !kept.iter().any(|k| k.overlaps(s)) {
            kept.push(s.clone());
        }
    }
    kept.sort_by(Span::scan_order);
    kept
}

/// A non-overlapping span selection committed to one dynasty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistentSequence {
    pub dynasty: Dynasty,
    pub spans: Vec<Span>,
}

impl ConsistentSequence {
    pub fn labels(&self) -> Vec<EntityLabel> {
        self.spans.iter().map(|s| s.label).collect()
    }

    pub fn has_name(&self) -> bool {
        self.spans.iter().any(|s| s.label == EntityLabel::Name)
    }

    /// Number of dynasty-bearing spans, all of which agree on `dynasty`.
    pub fn evidence(&self) -> usize {
        self.spans
            .iter()
            .filter(|s| s.label.is_dynasty_bearing())
            .count()
    }
}

/// One sequence per dynasty that the passage's spans can support, oldest
/// dynasty first, using default options.
pub fn consistent_sequences(
    spans: &[Span],
    dynasties: impl IntoIterator<Item = Dynasty>,
) -> Vec<ConsistentSequence> {
    consistent_sequences_with(spans, dynasties, &LatticeOptions::default())
}

pub fn consistent_sequences_with(
    spans: &[Span],
    dynasties: impl IntoIterator<Item = Dynasty>,
    opts: &LatticeOptions,
) -> Vec<ConsistentSequence> {
    let mut dynasties: Vec<Dynasty> = dynasties.into_iter().collect();
    dynasties.sort();
    dynasties.dedup();

    let min_evidence = opts.min_dynasty_evidence.max(1);
    let mut out = Vec::new();
    for d in dynasties {
        let resolved = resolve_longest_match(spans, d);
        // Leftmost-longest greedy pass; `resolved` is in scan order, so the
        // first span at each start is the longest one there.
        let mut frontier = 0;
        let mut picked = Vec::new();
        for s in resolved {
            if s.start >= frontier {
                frontier = s.end;
                picked.push(s);
            }
        }
        let seq = ConsistentSequence {
            dynasty: d,
            spans: picked,
        };
        if seq.evidence() >= min_evidence {
            out.push(seq);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Holds,
    Violated,
    /// The enumeration hit its cap, so membership cannot be decided.
    Inapplicable,
}

/// Checks that every production-path sequence is one of the enumerated
/// candidates that survive a brute-force application of the dynasty,
/// longest-match and evidence rules.
pub fn verify_against_enumeration(
    spans: &[Span],
    dynasties: &[Dynasty],
    opts: &LatticeOptions,
    cap: usize,
) -> Verification {
    let produced = consistent_sequences_with(spans, dynasties.iter().copied(), opts);
    let min_evidence = opts.min_dynasty_evidence.max(1);

    for seq in &produced {
        let d = seq.dynasty;
        let valid: Vec<Span> = spans
            .iter()
            .filter(|s| match s.label {
                EntityLabel::Address | EntityLabel::Entry => true,
                _ => s.dynasties.iter().any(|x| x == d),
            })
            .cloned()
            .collect();
        let unshadowed: Vec<Span> = valid
            .iter()
            .filter(|s| {
                !valid.iter().any(|t| {
                    t.label == s.label
                        && t.start < s.end
                        && s.start < t.end
                        && (t.end - t.start) > (s.end - s.start)
                })
            })
            .cloned()
            .collect();

        let enumeration = enumerate_candidates(&unshadowed, cap);
        if enumeration.truncated {
            return Verification::Inapplicable;
        }
        let mut target = seq.spans.clone();
        target.sort_by(Span::scan_order);
        let found = enumeration.candidates.iter().any(|c| {
            let all_d = c.choices.iter().flatten().all(|&x| x == d);
            let evidence = c.choices.iter().flatten().count();
            all_d && evidence >= min_evidence && c.spans == target
        });
        if !found {
            return Verification::Violated;
        }
    }
    Verification::Holds
}

#[derive(Debug, Serialize)]
struct SpanDump<'a> {
    start: usize,
    end: usize,
    surface: &'a str,
    label: EntityLabel,
    dynasties: Vec<&'a str>,
}

#[derive(Debug, Serialize)]
struct SequenceDump<'a> {
    dynasty: &'a str,
    labels: String,
    spans: Vec<[usize; 2]>,
}

/// JSON debug view of a passage's lattice.
pub fn dump_lattice(
    content: &str,
    spans: &[Span],
    sequences: &[ConsistentSequence],
    vocab: &DynastyVocab,
) -> serde_json::Value {
    let span_dump: Vec<SpanDump> = spans
        .iter()
        .map(|s| SpanDump {
            start: s.start,
            end: s.end,
            surface: &s.surface,
            label: s.label,
            dynasties: s.dynasties.iter().map(|d| vocab.chinese(d)).collect(),
        })
        .collect();
    let seq_dump: Vec<SequenceDump> = sequences
        .iter()
        .map(|q| SequenceDump {
            dynasty: vocab.chinese(q.dynasty),
            labels: crate::span::join_labels(&q.labels(), " "),
            spans: q.spans.iter().map(|s| [s.start, s.end]).collect(),
        })
        .collect();
    serde_json::json!({
        "content": content,
        "spans": span_dump,
        "sequences": seq_dump,
    })
}
