//! Gazetteer documents and their segmentation into passages.
//!
//! Offsets everywhere are counted in Unicode scalar values, never bytes.
//! The circle mark (○) and line breaks are treated as hard passage
//! boundaries.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// The circle used in transcriptions as a general break marker.
pub const DELIMITER: char = '○';

pub fn is_boundary(c: char) -> bool {
    c == DELIMITER || c == '\n'
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentMeta {
    pub title: Option<String>,
    pub period: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub source_id: String,
    pub title: Option<String>,
    pub period: Option<String>,
    text: String,
    char_count: usize,
}

impl Document {
    /// Builds a document from in-memory text, normalizing line breaks.
    pub fn new(source_id: impl Into<String>, text: &str, meta: DocumentMeta) -> Self {
        let text = normalize_newlines(text);
        let char_count = text.chars().count();
        Document {
            source_id: source_id.into(),
            title: meta.title,
            period: meta.period,
            text,
            char_count,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn char_count(&self) -> usize {
        self.char_count
    }
}

fn normalize_newlines(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_string();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Reads one UTF-8 text file. The source id is the file stem.
pub fn load_document(path: &Path, meta: Option<&DocumentMeta>) -> Result<Document> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Encoding {
        path: path.to_path_buf(),
        offset: e.valid_up_to(),
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Document::new(stem, text, meta.cloned().unwrap_or_default()))
}

/// A delimiter-free stretch of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Passage {
    pub source_id: String,
    pub index: usize,
    /// Offset of the first character in the document text.
    pub start: usize,
    /// Exclusive end offset in the document text.
    pub end: usize,
    pub content: String,
}

impl Passage {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits a document at every maximal run of delimiters and newlines.
pub fn segment_passages(doc: &Document) -> Vec<Passage> {
    let mut passages = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for c in doc.text.chars() {
        if is_boundary(c) {
            if !current.is_empty() {
                passages.push(Passage {
                    source_id: doc.source_id.clone(),
                    index: passages.len(),
                    start,
                    end: pos,
                    content: std::mem::take(&mut current),
                });
            }
            start = pos + 1;
        } else {
            current.push(c);
        }
        pos += 1;
    }
    if !current.is_empty() {
        passages.push(Passage {
            source_id: doc.source_id.clone(),
            index: passages.len(),
            start,
            end: pos,
            content: current,
        });
    }
    passages
}

/// Parses the sidecar metadata table (`source_id<TAB>title<TAB>period`).
pub fn parse_metadata(text: &str, origin: &str) -> Result<BTreeMap<String, DocumentMeta>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.is_empty() || cols.len() > 3 || cols[0].is_empty() {
            return Err(Error::malformed(
                origin,
                i + 1,
                "expected `source_id<TAB>title<TAB>period`",
            ));
        }
        let opt = |j: usize| {
            cols.get(j)
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        out.insert(
            cols[0].to_string(),
            DocumentMeta {
                title: opt(1),
                period: opt(2),
            },
        );
    }
    Ok(out)
}

pub fn load_metadata(path: &Path) -> Result<BTreeMap<String, DocumentMeta>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(&text, &path.display().to_string())
}

/// A document that could not be loaded; the rest of the corpus still is.
#[derive(Debug)]
pub struct LoadFailure {
    pub path: PathBuf,
    pub error: Error,
}

/// An ordered collection of documents with unique source ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.source_id.as_str()) {
                return Err(Error::DuplicateSource(d.source_id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    /// Loads files and directories (non-recursive, `*.txt`, sorted by name).
    /// Unreadable files are returned as failures instead of aborting.
    pub fn load(
        paths: &[PathBuf],
        metadata: &BTreeMap<String, DocumentMeta>,
    ) -> Result<(Corpus, Vec<LoadFailure>)> {
        let mut files = Vec::new();
        for p in paths {
            if p.is_dir() {
                let mut found = Vec::new();
                for entry in std::fs::read_dir(p).map_err(|e| Error::io(p, e))? {
                    let path = entry.map_err(|e| Error::io(p, e))?.path();
                    if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
                        found.push(path);
                    }
                }
                found.sort();
                files.extend(found);
            } else {
                files.push(p.clone());
            }
        }

        let mut documents = Vec::new();
        let mut failures = Vec::new();
        for path in files {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            match load_document(&path, metadata.get(&stem)) {
                Ok(doc) => documents.push(doc),
                Err(error) => failures.push(LoadFailure { path, error }),
            }
        }
        Ok((Corpus::new(documents)?, failures))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, source_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.source_id == source_id)
    }

    /// Resolves a passage by document and ordinal.
    pub fn passage(&self, source_id: &str, index: usize) -> Option<Passage> {
        self.get(source_id)
            .and_then(|d| segment_passages(d).into_iter().nth(index))
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }
}
