//! Label n-gram statistics over consistent sequences.
//!
//! Counts are used only to surface recurring label windows that could become
//! filter patterns; there is no smoothing or probability estimation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::lattice::ConsistentSequence;
use crate::span::{join_labels, EntityLabel};

pub const DEFAULT_N: usize = 6;
pub const DEFAULT_K: usize = 4;

pub type LabelNgram = Vec<EntityLabel>;

/// Sliding-window counts of length-`n` label windows. Sequences shorter
/// than `n` contribute nothing.
pub fn count_ngrams<'a, I>(sequences: I, n: usize) -> BTreeMap<LabelNgram, u64>
where
    I: IntoIterator<Item = &'a [EntityLabel]>,
{
    assert!(n >= 1, "n-gram order must be positive");
    let mut counts = BTreeMap::new();
    for labels in sequences {
        for w in labels.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn count_sequence_ngrams(sequences: &[ConsistentSequence], n: usize) -> BTreeMap<LabelNgram, u64> {
    let labels: Vec<Vec<EntityLabel>> = sequences.iter().map(|s| s.labels()).collect();
    count_ngrams(labels.iter().map(Vec::as_slice), n)
}

/// Merges partial counts, e.g. from per-document workers.
pub fn merge_counts(into: &mut BTreeMap<LabelNgram, u64>, from: BTreeMap<LabelNgram, u64>) {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsequenceStat {
    pub labels: Vec<EntityLabel>,
    /// Number of sequences containing the window at least once.
    pub frequency: u64,
    pub distinct_labels: usize,
    pub has_name: bool,
}

impl SubsequenceStat {
    fn new(labels: Vec<EntityLabel>, frequency: u64) -> Self {
        let distinct_labels = labels.iter().collect::<BTreeSet<_>>().len();
        let has_name = labels.contains(&EntityLabel::Name);
        SubsequenceStat {
            labels,
            frequency,
            distinct_labels,
            has_name,
        }
    }

    /// More distinct labels first, then more frequent, then label order.
    pub fn rank_order(a: &Self, b: &Self) -> Ordering {
        b.distinct_labels
            .cmp(&a.distinct_labels)
            .then(b.frequency.cmp(&a.frequency))
            .then(a.labels.cmp(&b.labels))
    }
}

/// Ranks contiguous length-`k` label windows by how many sequences contain
/// them, preferring windows with more distinct labels.
pub fn mine_subsequences<'a, I>(sequences: I, k: usize, require_name: bool) -> Vec<SubsequenceStat>
where
    I: IntoIterator<Item = &'a [EntityLabel]>,
{
    assert!(k >= 2, "subsequence length must be at least 2");
    let mut freq: BTreeMap<Vec<EntityLabel>, u64> = BTreeMap::new();
    for labels in sequences {
        let windows: BTreeSet<&[EntityLabel]> = labels
            .windows(k)
            .filter(|w| !require_name || w.contains(&EntityLabel::Name))
            .collect();
        for w in windows {
            *freq.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    let mut stats: Vec<SubsequenceStat> = freq
        .into_iter()
        .map(|(labels, f)| SubsequenceStat::new(labels, f))
        .collect();
    stats.sort_by(SubsequenceStat::rank_order);
    stats
}

pub fn mine_sequence_subsequences(
    sequences: &[ConsistentSequence],
    k: usize,
    require_name: bool,
) -> Vec<SubsequenceStat> {
    let labels: Vec<Vec<EntityLabel>> = sequences.iter().map(|s| s.labels()).collect();
    mine_subsequences(labels.iter().map(Vec::as_slice), k, require_name)
}

/// TSV report of ranked subsequences: `labels<TAB>count<TAB>distinct_labels`.
pub fn subsequence_tsv(stats: &[SubsequenceStat]) -> String {
    let mut out = String::from("labels\tcount\tdistinct_labels\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            join_labels(&s.labels, "+"),
            s.frequency,
            s.distinct_labels
        );
    }
    out
}

/// TSV report of n-gram counts, ranked like subsequences.
pub fn ngram_tsv(counts: &BTreeMap<LabelNgram, u64>) -> String {
    let mut stats: Vec<SubsequenceStat> = counts
        .iter()
        .map(|(k, &v)| SubsequenceStat::new(k.clone(), v))
        .collect();
    stats.sort_by(SubsequenceStat::rank_order);
    subsequence_tsv(&stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::parse_labels;
    use proptest::prelude::*;
    use EntityLabel::*;

    fn seqs(lines: &[&str]) -> Vec<Vec<EntityLabel>> {
        lines.iter().map(|l| parse_labels(l).unwrap()).collect()
    }

    fn slices(v: &[Vec<EntityLabel>]) -> impl Iterator<Item = &[EntityLabel]> {
        v.iter().map(Vec::as_slice)
    }

    #[test]
    fn window_arithmetic() {
        let six = seqs(&["NAME ADDRESS ADDRESS ADDRESS OFFICE OFFICE"]);
        let c = count_ngrams(slices(&six), 6);
        assert_eq!(c.len(), 1);
        assert_eq!(c.values().copied().collect::<Vec<_>>(), vec![1]);

        let seven = seqs(&["NAME ADDRESS ADDRESS ADDRESS OFFICE OFFICE REIGN"]);
        assert_eq!(count_ngrams(slices(&seven), 6).len(), 2);

        let short = seqs(&["NAME OFFICE"]);
        assert!(count_ngrams(slices(&short), 6).is_empty());
    }

    #[test]
    fn t1_song_mines_p4_first() {
        let corpus = seqs(&["NAME ADDRESS ADDRESS ADDRESS OFFICE OFFICE"]);
        let ranked = mine_subsequences(slices(&corpus), 4, true);
        assert_eq!(ranked[0].labels, vec![Name, Address, Address, Address]);
        assert_eq!(ranked[0].frequency, 1);
        assert!(ranked.iter().all(|s| s.has_name));
        assert_eq!(ranked.len(), 1);
    }

    #[test]
    fn distinct_labels_outrank_frequency() {
        let mut corpus = Vec::new();
        for _ in 0..10 {
            corpus.push(vec![Name, Address, Reign, Entry]);
        }
        for _ in 0..50 {
            corpus.push(vec![Name, Name, Name, Name]);
        }
        let ranked = mine_subsequences(slices(&corpus), 4, true);
        assert_eq!(ranked[0].labels, vec![Name, Address, Reign, Entry]);
        assert_eq!(ranked[0].frequency, 10);
        assert_eq!(ranked[0].distinct_labels, 4);
        assert_eq!(ranked[1].frequency, 50);
    }

    #[test]
    fn frequency_counts_sequences_not_occurrences() {
        let corpus = seqs(&["NAME OFFICE NAME OFFICE"]);
        let ranked = mine_subsequences(slices(&corpus), 2, false);
        let no = ranked.iter().find(|s| s.labels == vec![Name, Office]).unwrap();
        assert_eq!(no.frequency, 1);
        assert_eq!(count_ngrams(slices(&corpus), 2)[&vec![Name, Office]], 2);
    }

    #[test]
    fn empty_inputs() {
        let empty: Vec<Vec<EntityLabel>> = Vec::new();
        assert!(mine_subsequences(slices(&empty), 4, true).is_empty());
        assert!(count_ngrams(slices(&empty), 6).is_empty());
    }

    #[test]
    fn tsv_reports() {
        let corpus = seqs(&["NAME ADDRESS ADDRESS ADDRESS OFFICE OFFICE"]);
        let tsv = subsequence_tsv(&mine_subsequences(slices(&corpus), 4, true));
        assert_eq!(
            tsv,
            "labels\tcount\tdistinct_labels\nNAME+ADDRESS+ADDRESS+ADDRESS\t1\t2\n"
        );
        let tsv = ngram_tsv(&count_ngrams(slices(&corpus), 6));
        assert!(tsv.ends_with("NAME+ADDRESS+ADDRESS+ADDRESS+OFFICE+OFFICE\t1\t3\n"));
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<Vec<EntityLabel>>> {
        proptest::collection::vec(
            proptest::collection::vec(proptest::sample::select(EntityLabel::ALL.to_vec()), 0..10),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn count_total_matches_window_formula(corpus in arb_corpus(), n in 1usize..7) {
            let total: u64 = count_ngrams(slices(&corpus), n).values().sum();
            let expected: usize = corpus.iter().map(|s| (s.len() + 1).saturating_sub(n)).sum();
            prop_assert_eq!(total as usize, expected);
        }

        #[test]
        fn ranking_is_total_and_name_filtered(corpus in arb_corpus(), k in 2usize..5) {
            let ranked = mine_subsequences(slices(&corpus), k, true);
            prop_assert!(ranked.iter().all(|s| s.has_name && s.labels.len() == k));
            prop_assert!(ranked.iter().all(|s| s.distinct_labels <= k.min(5)));
            let mut again = ranked.clone();
            again.reverse();
            again.sort_by(SubsequenceStat::rank_order);
            prop_assert_eq!(again, ranked);
        }
    }
}
