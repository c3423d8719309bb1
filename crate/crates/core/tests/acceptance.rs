//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! elapsed time; the test fails if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::time::{Duration, Instant};

use fangzhi_core::corpus::{Corpus, Document, DocumentMeta};
use fangzhi_core::dynasty::{Dynasty, DynastySet, DynastyVocab};
use fangzhi_core::extract::{
    extract_corpus, pattern_select, process_document, records_jsonl, render_annotation,
    strip_annotation, ExtractedRecord, ExtractionConfig, StyleKind,
};
use fangzhi_core::lattice::{
    consistent_sequences, consistent_sequences_with, enumerate_candidates, verify_against_enumeration, ConsistentSequence,
    LatticeOptions, Verification, DEFAULT_CAP,
};
use fangzhi_core::lexicon::Lexicon;
use fangzhi_core::linkage::{classify, report, ReferenceTable};
use fangzhi_core::seqmodel::count_ngrams;
use fangzhi_core::span::{EntityLabel, Span};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const T1: &str = "李常字公擇南康建昌人自宣州觀察推官發運使";
const T1_LEXICON: &str = "\
李常\tNAME\t宋,元,明,清
南康\tADDRESS\t
建昌\tADDRESS\t
宣州\tADDRESS\t
觀察推官\tOFFICE\t唐,宋
察推\tOFFICE\t宋,元
發運使\tOFFICE\t宋
";
const T1_SONG_ANNOTATION: &str = "<NAME Song>李常</NAME>字公擇<ADDRESS>南康</ADDRESS><ADDRESS>建昌</ADDRESS>人自\
<ADDRESS>宣州</ADDRESS><OFFICE Song>觀察推官</OFFICE><OFFICE Song>發運使</OFFICE>";

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);
/// (source, passage, dynasty, name, style, kind, name_span, style_span)
type PlantedRecord = (String, usize, String, String, String, StyleKind, (usize, usize), (usize, usize));

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vocab() -> DynastyVocab {
    DynastyVocab::default()
}

fn dyn_of(v: &DynastyVocab, s: &str) -> Dynasty {
    v.lookup(s).unwrap()
}

fn t1_lexicon() -> Lexicon {
    Lexicon::from_tsv(T1_LEXICON, vocab()).unwrap()
}

fn t1_corpus() -> Corpus {
    Corpus::new(vec![Document::new("t1", T1, DocumentMeta::default())]).unwrap()
}

/// Counts maximal non-overlapping selections times dynasty choices by
/// testing every subset.
fn brute_candidate_count(spans: &[Span]) -> usize {
    let n = spans.len();
    let mut total = 0;
    for mask in 0u32..(1 << n) {
        let picked: Vec<&Span> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &spans[i]).collect();
        let disjoint = picked
            .iter()
            .enumerate()
            .all(|(i, a)| picked[i + 1..].iter().all(|b| a.end <= b.start || b.end <= a.start));
        if !disjoint {
            continue;
        }
        let maximal = (0..n)
            .filter(|i| mask >> i & 1 == 0)
            .all(|i| picked.iter().any(|p| p.start < spans[i].end && spans[i].start < p.end));
        if !maximal {
            continue;
        }
        total += picked
            .iter()
            .map(|s| if s.label.is_dynasty_bearing() { s.dynasties.len() } else { 1 })
            .product::<usize>();
    }
    total
}

fn surfaces(seq: &ConsistentSequence) -> Vec<&str> {
    seq.spans.iter().map(|s| s.surface.as_str()).collect()
}

fn t1_golden_pipeline() -> Outcome {
    let lex = t1_lexicon();
    let v = lex.vocab();
    let spans = lex.scan_text(T1);
    let en = enumerate_candidates(&spans, DEFAULT_CAP);
    check(!en.truncated && en.candidates.len() == 16, || {
        format!("{} candidates (truncated: {})", en.candidates.len(), en.truncated)
    })?;
    let brute = brute_candidate_count(&spans);
    check(brute == 16, || format!("subset oracle counts {brute}"))?;

    let seqs = consistent_sequences(&spans, v.all());
    let got: Vec<(&str, Vec<&str>)> = seqs.iter().map(|s| (v.chinese(s.dynasty), surfaces(s))).collect();
    let want = vec![
        ("宋", vec!["李常", "南康", "建昌", "宣州", "觀察推官", "發運使"]),
        ("元", vec!["李常", "南康", "建昌", "宣州", "察推"]),
    ];
    check(got == want, || format!("sequences {got:?}"))?;

    let song = render_annotation(&seqs[0], T1, v);
    check(song == T1_SONG_ANNOTATION, || format!("annotation {song}"))?;

    let out = extract_corpus(&t1_corpus(), &lex, &ExtractionConfig::default(), &LatticeOptions::default());
    let recs: Vec<(&str, &str, Option<&str>, StyleKind)> = out
        .records
        .iter()
        .map(|r| (v.chinese(r.dynasty), r.name.as_str(), r.style_name.as_deref(), r.style_kind))
        .collect();
    let want = vec![
        ("宋", "李常", Some("公擇"), StyleKind::Zi),
        ("元", "李常", Some("公擇"), StyleKind::Zi),
    ];
    check(recs == want, || format!("records {recs:?}"))?;
    Ok("16 candidates, Song and Yuan survive, 2 records".into())
}

fn longest_match_rule() -> Outcome {
    let lex = t1_lexicon();
    let v = lex.vocab();
    let spans = lex.scan_text(T1);
    let song = dyn_of(v, "宋");
    let seqs = consistent_sequences(&spans, v.all());
    let song_seqs: Vec<&ConsistentSequence> = seqs.iter().filter(|s| s.dynasty == song).collect();
    check(!song_seqs.is_empty(), || "no Song sequence".into())?;
    for s in &song_seqs {
        check(!s.spans.iter().any(|x| x.surface == "察推"), || {
            format!("察推 in Song sequence {:?}", surfaces(s))
        })?;
    }
    // Under Yuan the longer office is unavailable, so the short one stands.
    let yuan = seqs.iter().find(|s| v.chinese(s.dynasty) == "元").ok_or("no Yuan sequence")?;
    check(yuan.spans.iter().any(|x| x.surface == "察推"), || "察推 missing under Yuan".into())?;
    Ok(format!("{} Song sequence(s) checked", song_seqs.len()))
}

fn random_instance(rng: &mut StdRng) -> (Vec<Span>, Vec<Dynasty>) {
    let n_dyn = rng.gen_range(1..=3);
    let dynasties: Vec<Dynasty> = (0..n_dyn).map(Dynasty::from_index).collect();
    let text_len = rng.gen_range(4..=14);
    let n_spans = rng.gen_range(0..=8);
    let mut spans: Vec<Span> = Vec::new();
    for _ in 0..n_spans {
        let start = rng.gen_range(0..text_len);
        let end = (start + rng.gen_range(1..=4)).min(text_len);
        let label = *EntityLabel::ALL.choose(rng).unwrap();
        let dynasties = if label.is_dynasty_bearing() {
            let mut set = DynastySet::EMPTY;
            while set.is_empty() {
                for &d in &dynasties {
                    if rng.gen_bool(0.5) {
                        set.insert(d);
                    }
                }
            }
            set
        } else {
            DynastySet::EMPTY
        };
        let span = Span {
            start,
            end,
            label,
            dynasties,
            surface: format!("s{start}_{end}"),
        };
        if !spans.iter().any(|s| s.start == start && s.end == end && s.label == label) {
            spans.push(span);
        }
    }
    spans.sort_by(Span::scan_order);
    (spans, dynasties)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_1a77);
    let instances = 500;
    let mut nonempty = 0;
    for opts in [LatticeOptions::default(), LatticeOptions { min_dynasty_evidence: 1 }] {
        for i in 0..instances {
            let (spans, dynasties) = random_instance(&mut rng);
            match verify_against_enumeration(&spans, &dynasties, &opts, DEFAULT_CAP) {
                Verification::Holds => {}
                other => return Err(format!("instance {i}: {other:?} for {spans:?}")),
            }
            if !consistent_sequences_with(&spans, dynasties.iter().copied(), &opts).is_empty() {
                nonempty += 1;
            }
        }
    }
    check(nonempty >= instances / 4, || format!("only {nonempty} instances produced sequences"))?;
    Ok(format!("{} instances hold, {nonempty} with sequences", 2 * instances))
}

fn pattern_selection() -> Outcome {
    let lex = t1_lexicon();
    let v = lex.vocab();
    let config = ExtractionConfig::default();
    let seqs = consistent_sequences(&lex.scan_text(T1), v.all());
    let selected = pattern_select(&seqs, &config.patterns);
    let song = selected
        .iter()
        .find(|s| v.chinese(s.sequence.dynasty) == "宋")
        .ok_or("Song sequence not selected")?;
    check(song.pattern.id == "P4", || format!("Song selected via {}", song.pattern.id))?;

    let mut rng = StdRng::seed_from_u64(7);
    let no_name = [EntityLabel::Address, EntityLabel::Entry, EntityLabel::Office, EntityLabel::Reign];
    let d = Dynasty::from_index(0);
    for _ in 0..500 {
        let len = rng.gen_range(0..10);
        let spans: Vec<Span> = (0..len)
            .map(|i| {
                let label = *no_name.choose(&mut rng).unwrap();
                Span {
                    start: i,
                    end: i + 1,
                    label,
                    dynasties: if label.is_dynasty_bearing() { DynastySet::single(d) } else { DynastySet::EMPTY },
                    surface: format!("{i}"),
                }
            })
            .collect();
        let seq = ConsistentSequence { dynasty: d, spans };
        let picked = pattern_select(std::slice::from_ref(&seq), &config.patterns);
        check(picked.is_empty(), || format!("NAME-free sequence selected: {:?}", seq.labels()))?;
    }
    Ok("Song via P4; 500 NAME-free sequences rejected".into())
}

fn record(v: &DynastyVocab, dynasty: &str, name: &str, style: Option<&str>, passage: usize) -> ExtractedRecord {
    ExtractedRecord {
        dynasty: dyn_of(v, dynasty),
        name: name.into(),
        style_name: style.map(String::from),
        style_kind: if style.is_some() { StyleKind::Zi } else { StyleKind::None },
        source_id: "fixture".into(),
        passage_index: passage,
        name_span: (0, name.chars().count()),
        style_span: None,
        sequence_labels: vec![EntityLabel::Name, EntityLabel::Address],
        pattern_id: "P4".into(),
    }
}

fn proportion_oracle(count: usize, total: usize) -> String {
    let p = 100.0 * count as f64 / total as f64;
    if p >= 10.0 {
        format!("{p:.1}%")
    } else {
        format!("{p:.2}%")
    }
}

fn type_report_proportions() -> Outcome {
    let v = vocab();
    let mut reference = String::new();
    let mut records = Vec::new();
    // (record dynasty, name agrees, style agrees, count) against a Song row.
    let plan = [
        ("宋", true, true, 562),
        ("宋", true, false, 544),
        ("元", true, true, 40),
        ("宋", false, true, 31),
        ("元", true, false, 29),
        ("元", false, true, 20),
        ("宋", false, false, 34),
    ];
    let mut n = 0;
    for (dynasty, name_ok, style_ok, count) in plan {
        for _ in 0..count {
            n += 1;
            reference.push_str(&format!("{n}\t宋\t名{n}\t字{n}\tzi\n"));
            let name = if name_ok { format!("名{n}") } else { format!("他{n}") };
            let style = if style_ok { format!("字{n}") } else { format!("別{n}") };
            records.push(record(&v, dynasty, &name, Some(&style), n));
        }
    }
    let table = ReferenceTable::parse(&reference, "table1", &v).map_err(|e| e.to_string())?;
    let cls: Vec<_> = records.iter().map(|r| classify(r, &table)).collect();
    let rep = report(&cls);
    check(rep.total == 1260, || format!("total {}", rep.total))?;
    let printed = ["44.6%", "43.2%", "3.17%", "2.46%", "2.30%", "1.59%"];
    for (row, want) in rep.rows.iter().zip(printed) {
        check(row.proportion == want, || format!("type {}: {} != {want}", row.type_code, row.proportion))?;
        let oracle = proportion_oracle(row.count, rep.total);
        check(row.proportion == oracle, || format!("type {}: oracle {oracle}", row.type_code))?;
    }
    Ok("six proportions match the printed table".into())
}

fn classification_examples() -> Outcome {
    let v = vocab();
    let table = ReferenceTable::parse(
        "77918\t清\t李滋然\t命三\tzi\n180112\t唐\t薛平\n180316\t唐\t薛平\n3001\t宋\t李常\n",
        "examples",
        &v,
    )
    .map_err(|e| e.to_string())?;
    let cases = [
        (record(&v, "宋", "李常", Some("公擇"), 0), 2, "3001"),
        (record(&v, "清", "李滋然", Some("命三"), 1), 1, "77918"),
        (record(&v, "唐", "薛平", Some("坦途"), 2), 2, "180112"),
    ];
    for (rec, want, pid) in &cases {
        let c = classify(rec, &table);
        check(c.type_code == *want && c.matched_person_id.as_deref() == Some(*pid), || {
            format!("{}: type {} via {:?}", rec.name, c.type_code, c.matched_person_id)
        })?;
    }
    Ok("李常 2, 李滋然 1, 薛平 2".into())
}

fn ngram_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(42);
    let corpora = 300;
    for c in 0..corpora {
        let seqs: Vec<Vec<EntityLabel>> = (0..rng.gen_range(0..12))
            .map(|_| {
                (0..rng.gen_range(0..15))
                    .map(|_| *EntityLabel::ALL.choose(&mut rng).unwrap())
                    .collect()
            })
            .collect();
        let n = rng.gen_range(1..=7);
        let got = count_ngrams(seqs.iter().map(Vec::as_slice), n);

        let mut brute: HashMap<Vec<EntityLabel>, u64> = HashMap::new();
        let mut windows = 0u64;
        for s in &seqs {
            let mut start = 0;
            while start + n <= s.len() {
                let mut gram = Vec::with_capacity(n);
                for k in 0..n {
                    gram.push(s[start + k]);
                }
                *brute.entry(gram).or_default() += 1;
                windows += 1;
                start += 1;
            }
        }
        let brute: BTreeMap<_, _> = brute.into_iter().collect();
        check(got == brute, || format!("corpus {c} (n={n}) differs"))?;
        check(got.values().sum::<u64>() == windows, || format!("corpus {c}: window total"))?;
    }
    Ok(format!("{corpora} corpora agree"))
}

/// A synthetic corpus where every planted biography yields exactly one
/// record. Lexicon surfaces draw first and second characters from disjoint
/// pools, so concatenations never form accidental entries.
struct Planted {
    lexicon: Lexicon,
    corpus: Corpus,
    expected: Vec<PlantedRecord>,
    passages: usize,
}

fn pairs(a: &str, b: &str) -> Vec<String> {
    a.chars().flat_map(|x| b.chars().map(move |y| format!("{x}{y}"))).collect()
}

fn planted_corpus(seed: u64) -> Planted {
    let v = vocab();
    let all: Vec<Dynasty> = v.all().collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let names = pairs("甲乙丙丁戊己庚辛壬癸", "子丑寅卯辰巳午未申酉戌亥");
    let addresses = pairs("東西南北中", "山川河湖原");
    let offices = pairs("令尉守牧僕", "曹府司院署");
    let styles = pairs("天地玄黃", "宇宙洪荒");
    let filler: Vec<char> = "之而於其以為則乃也矣".chars().collect();

    let mut tsv = String::new();
    let mut name_dyn: Vec<(Dynasty, Dynasty)> = Vec::new();
    for name in &names {
        let mut pick = all.clone();
        pick.shuffle(&mut rng);
        name_dyn.push((pick[0], pick[1]));
        tsv.push_str(&format!("{name}\tNAME\t{},{}\n", v.chinese(pick[0]), v.chinese(pick[1])));
    }
    for a in &addresses {
        tsv.push_str(&format!("{a}\tADDRESS\t\n"));
    }
    let mut office_dyn: BTreeMap<Dynasty, Vec<&String>> = BTreeMap::new();
    for (i, o) in offices.iter().enumerate() {
        let d = all[i % all.len()];
        office_dyn.entry(d).or_default().push(o);
        tsv.push_str(&format!("{o}\tOFFICE\t{}\n", v.chinese(d)));
    }
    let lexicon = Lexicon::from_tsv(&tsv, v.clone()).unwrap();

    let fill = |rng: &mut StdRng, k: usize| -> String { (0..k).map(|_| *filler.choose(rng).unwrap()).collect() };
    let mut docs = Vec::new();
    let mut expected = Vec::new();
    let mut passages = 0;
    for doc_i in 0..10 {
        let source = format!("doc{doc_i:02}");
        let mut text = String::new();
        for p in 0..100 {
            if p > 0 {
                text.push(if rng.gen_bool(0.7) { '○' } else { '\n' });
            }
            passages += 1;
            let roll = rng.gen_range(0..10);
            if roll < 7 {
                let ni = rng.gen_range(0..names.len());
                let d = if rng.gen_bool(0.5) { name_dyn[ni].0 } else { name_dyn[ni].1 };
                let offs = &office_dyn[&d];
                let prefix = { let k = rng.gen_range(0..3); fill(&mut rng, k) };
                let (trigger, kind) = if rng.gen_bool(0.8) { ('字', StyleKind::Zi) } else { ('號', StyleKind::Hao) };
                let style = styles.choose(&mut rng).unwrap().clone();
                let at = prefix.chars().count();
                let mut body = prefix;
                body.push_str(&names[ni]);
                body.push(trigger);
                body.push_str(&style);
                for _ in 0..3 {
                    body.push_str(addresses.choose(&mut rng).unwrap());
                }
                body.push_str(&{ let k = rng.gen_range(0..3); fill(&mut rng, k) });
                body.push_str(offs.choose(&mut rng).unwrap());
                body.push_str(offs.choose(&mut rng).unwrap());
                body.push_str(&{ let k = rng.gen_range(0..4); fill(&mut rng, k) });
                text.push_str(&body);
                expected.push((
                    source.clone(),
                    p,
                    v.chinese(d).to_string(),
                    names[ni].clone(),
                    style,
                    kind,
                    (at, at + 2),
                    (at + 3, at + 5),
                ));
            } else if roll < 8 {
                // A lone name has no corroborating evidence.
                text.push_str(&fill(&mut rng, 2));
                text.push_str(names.choose(&mut rng).unwrap());
                text.push('字');
                text.push_str(styles.choose(&mut rng).unwrap());
                text.push_str(addresses.choose(&mut rng).unwrap());
            } else {
                text.push_str(&fill(&mut rng, 3));
                text.push_str(addresses.choose(&mut rng).unwrap());
                text.push_str(offices.choose(&mut rng).unwrap());
                text.push_str(&fill(&mut rng, 1));
            }
        }
        docs.push(Document::new(source, &text, DocumentMeta::default()));
    }
    Planted {
        lexicon,
        corpus: Corpus::new(docs).unwrap(),
        expected,
        passages,
    }
}

fn round_trip_and_determinism() -> Outcome {
    let planted = planted_corpus(2024);
    check(planted.passages >= 1000, || format!("{} passages", planted.passages))?;
    let config = ExtractionConfig::default();
    let opts = LatticeOptions::default();
    let v = planted.lexicon.vocab();

    let mut rendered = 0;
    for doc in planted.corpus.documents() {
        for r in process_document(doc, &planted.lexicon, &config, &opts) {
            for seq in &r.sequences {
                let ann = render_annotation(seq, &r.passage.content, v);
                check(strip_annotation(&ann) == r.passage.content, || {
                    format!("{}:{} does not strip back", doc.source_id, r.passage.index)
                })?;
                rendered += 1;
            }
        }
    }

    let first = extract_corpus(&planted.corpus, &planted.lexicon, &config, &opts);
    let second = extract_corpus(&planted.corpus, &planted.lexicon, &config, &opts);
    let a = records_jsonl(&first.records, v);
    let b = records_jsonl(&second.records, v);
    check(a.as_bytes() == b.as_bytes(), || "reruns differ".into())?;

    let mut got: Vec<_> = first
        .records
        .iter()
        .map(|r| {
            (
                r.source_id.clone(),
                r.passage_index,
                v.chinese(r.dynasty).to_string(),
                r.name.clone(),
                r.style_name.clone().unwrap_or_default(),
                r.style_kind,
                r.name_span,
                r.style_span.unwrap_or((0, 0)),
            )
        })
        .collect();
    let mut want = planted.expected.clone();
    got.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)));
    want.sort_by(|x, y| (&x.0, x.1).cmp(&(&y.0, y.1)));
    check(got == want, || {
        let missing = want.iter().find(|w| !got.contains(w));
        let extra = got.iter().find(|g| !want.contains(g));
        format!("{} records vs {} planted; missing {missing:?}, extra {extra:?}", got.len(), want.len())
    })?;
    Ok(format!(
        "{} passages, {rendered} annotations strip back, {} planted records recovered",
        planted.passages,
        want.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("T1 golden pipeline", Duration::from_secs(1), t1_golden_pipeline),
        ("longest-match rule", Duration::from_secs(1), longest_match_rule),
        ("oracle equivalence", Duration::from_secs(30), oracle_equivalence),
        ("pattern selection", Duration::from_secs(1), pattern_selection),
        ("type report proportions", Duration::from_secs(1), type_report_proportions),
        ("classification examples", Duration::from_secs(1), classification_examples),
        ("n-gram oracle", Duration::from_secs(10), ngram_oracle),
        ("round-trip and determinism", Duration::from_secs(60), round_trip_and_determinism),
    ];
    // Written straight to stderr so the lines show without --nocapture.
    let mut err = std::io::stderr().lock();
    let mut failed = Vec::new();
    for (name, limit, run) in criteria {
        let t = Instant::now();
        let outcome = run();
        let elapsed = t.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; exceeded {limit:?}")),
            other => other,
        };
        match &outcome {
            Ok(detail) => writeln!(err, "acceptance PASS {name} ({elapsed:.2?}): {detail}"),
            Err(why) => writeln!(err, "acceptance FAIL {name} ({elapsed:.2?}): {why}"),
        }
        .unwrap();
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
