use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use fangzhi_core::corpus::{load_metadata, Corpus};
use fangzhi_core::dynasty::DynastyVocab;
use fangzhi_core::extract::{
    extract_corpus, parse_records_jsonl, process_document, records_jsonl, render_annotation,
    ExtractionConfig,
};
use fangzhi_core::lattice::{dump_lattice, LatticeOptions};
use fangzhi_core::lexicon::Lexicon;
use fangzhi_core::linkage::{
    classifications_jsonl, classify, export_review_batch, parse_classifications_jsonl, report,
    ReferenceTable,
};
use fangzhi_core::seqmodel::{count_ngrams, mine_subsequences, ngram_tsv, subsequence_tsv};

use crate::config::RunConfig;

/// A command failure, carrying its exit-code class.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Io(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Internal(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Io(e) => write!(f, "i/o error: {e:#}"),
            Failure::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl From<fangzhi_core::Error> for Failure {
    fn from(e: fangzhi_core::Error) -> Self {
        use fangzhi_core::Error as E;
        match e {
            E::Io { .. } | E::Encoding { .. } => Failure::Io(e.into()),
            E::Json(_) => Failure::Internal(e.into()),
            _ => Failure::Config(e.into()),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(anyhow!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> CmdResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub(crate) fn read_file(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn load_vocab(cfg: &RunConfig) -> CmdResult<DynastyVocab> {
    match &cfg.dynasties {
        Some(p) => Ok(DynastyVocab::load(p)?),
        None => Ok(DynastyVocab::default()),
    }
}

pub fn load_lexicon(cfg: &RunConfig, vocab: DynastyVocab) -> CmdResult<Lexicon> {
    let lex = Lexicon::load(&cfg.lexicon, vocab)?;
    let stats = lex.stats();
    eprintln!("lexicon: {} rows, {} entries", stats.rows, stats.entries);
    Ok(lex)
}

pub fn load_extraction_config(cfg: &RunConfig) -> CmdResult<ExtractionConfig> {
    match &cfg.patterns {
        Some(p) => Ok(ExtractionConfig::load(p)?),
        None => Ok(ExtractionConfig::default()),
    }
}

/// Loads the corpus, reporting unreadable files and carrying on.
pub fn load_corpus(cfg: &RunConfig) -> CmdResult<Corpus> {
    let meta = match &cfg.metadata {
        Some(p) => load_metadata(p)?,
        None => Default::default(),
    };
    let (corpus, failures) = Corpus::load(&cfg.corpus, &meta)?;
    for f in &failures {
        eprintln!("skipping {}: {}", f.path.display(), f.error);
    }
    let chars: usize = corpus.documents().iter().map(|d| d.char_count()).sum();
    eprintln!("corpus: {} documents, {} characters", corpus.len(), chars);
    Ok(corpus)
}

fn lattice_options(cfg: &RunConfig) -> LatticeOptions {
    LatticeOptions {
        min_dynasty_evidence: cfg.min_evidence,
    }
}

/// Writes `annotated/<source>.txt` for every document: one line per
/// pattern-selected sequence, `passage<TAB>dynasty<TAB>pattern<TAB>annotation`.
pub fn cmd_annotate(cfg: &RunConfig) -> CmdResult<Vec<PathBuf>> {
    cfg.require(&["corpus", "lexicon"]).map_err(Failure::Config)?;
    let vocab = load_vocab(cfg)?;
    let lexicon = load_lexicon(cfg, vocab)?;
    let config = load_extraction_config(cfg)?;
    let corpus = load_corpus(cfg)?;
    let opts = lattice_options(cfg);
    let v = lexicon.vocab();

    let mut written = Vec::new();
    for doc in corpus.documents() {
        let results = process_document(doc, &lexicon, &config, &opts);
        let mut text = String::new();
        let mut dump = String::new();
        for r in &results {
            for (idx, pattern_id) in &r.selected {
                let seq = &r.sequences[*idx];
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    r.passage.index,
                    v.chinese(seq.dynasty),
                    pattern_id,
                    render_annotation(seq, &r.passage.content, v)
                ));
            }
            if cfg.dump_lattice {
                let mut value = dump_lattice(&r.passage.content, &r.spans, &r.sequences, v);
                value["passage_index"] = r.passage.index.into();
                dump.push_str(&value.to_string());
                dump.push('\n');
            }
        }
        let path = cfg.out.join("annotated").join(format!("{}.txt", doc.source_id));
        write_file(&path, &text)?;
        written.push(path);
        if cfg.dump_lattice {
            let path = cfg.out.join("lattice").join(format!("{}.jsonl", doc.source_id));
            write_file(&path, &dump)?;
        }
    }
    eprintln!("annotate: wrote {} files", written.len());
    Ok(written)
}

/// Runs extraction; writes `records.jsonl`, `ngrams.tsv` and
/// `subsequences.tsv`. Returns the number of records.
pub fn cmd_extract(cfg: &RunConfig) -> CmdResult<usize> {
    cfg.require(&["corpus", "lexicon"]).map_err(Failure::Config)?;
    let vocab = load_vocab(cfg)?;
    let lexicon = load_lexicon(cfg, vocab)?;
    let config = load_extraction_config(cfg)?;
    let corpus = load_corpus(cfg)?;

    let out = extract_corpus(&corpus, &lexicon, &config, &lattice_options(cfg));
    let labels = || out.sequence_labels.iter().map(Vec::as_slice);
    write_file(&cfg.records_path(), &records_jsonl(&out.records, lexicon.vocab()))?;
    write_file(
        &cfg.out.join("ngrams.tsv"),
        &ngram_tsv(&count_ngrams(labels(), cfg.ngram_n)),
    )?;
    write_file(
        &cfg.out.join("subsequences.tsv"),
        &subsequence_tsv(&mine_subsequences(labels(), cfg.subseq_k, true)),
    )?;
    eprintln!(
        "extract: {} records from {} consistent sequences",
        out.records.len(),
        out.sequence_labels.len()
    );
    Ok(out.records.len())
}

/// Classifies extracted records; writes `classifications.jsonl`,
/// `table1.tsv`, `table1.txt` and `review_batch.json`.
pub fn cmd_match(cfg: &RunConfig) -> CmdResult<usize> {
    cfg.require(&["reference"]).map_err(Failure::Config)?;
    let vocab = load_vocab(cfg)?;
    let reference_path = cfg.reference.as_ref().expect("checked by require");
    let table = ReferenceTable::load(reference_path, &vocab)?;
    let records_path = cfg.records_path();
    let records = parse_records_jsonl(
        &read_file(&records_path)?,
        &vocab,
        &records_path.display().to_string(),
    )?;
    // Without a corpus, review contexts are marked unavailable.
    let corpus = if cfg.corpus.is_empty() {
        Corpus::default()
    } else {
        load_corpus(cfg)?
    };

    let classifications: Vec<_> = records.iter().map(|r| classify(r, &table)).collect();
    let rep = report(&classifications);
    let batch = export_review_batch(&classifications, &corpus, cfg.context, cfg.include_type1, &vocab);

    write_file(&cfg.classifications_path(), &classifications_jsonl(&classifications, &vocab))?;
    write_file(&cfg.out.join("table1.tsv"), &rep.to_tsv())?;
    write_file(&cfg.out.join("table1.txt"), &rep.to_text())?;
    let json = serde_json::to_string_pretty(&batch).map_err(|e| Failure::Internal(e.into()))?;
    write_file(&cfg.out.join("review_batch.json"), &(json + "\n"))?;
    eprintln!(
        "match: {} records classified, {} queued for review",
        classifications.len(),
        batch.items.len()
    );
    Ok(classifications.len())
}

/// Renders the type report from `classifications.jsonl`.
pub fn cmd_report(cfg: &RunConfig, tsv: bool) -> CmdResult<String> {
    let vocab = load_vocab(cfg)?;
    let path = cfg.classifications_path();
    let cls = parse_classifications_jsonl(&read_file(&path)?, &vocab, &path.display().to_string())?;
    let rep = report(&cls);
    Ok(if tsv { rep.to_tsv() } else { rep.to_text() })
}
