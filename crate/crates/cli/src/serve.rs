//! Local JSON endpoint for expert review.
//!
//! Everything is read-only except the decision log, an append-only JSON
//! Lines file. Appends go through a single mutex-guarded writer and each
//! decision is written as one complete line followed by an fsync.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use fangzhi_core::corpus::{segment_passages, Corpus, Passage};
use fangzhi_core::dynasty::DynastyVocab;
use fangzhi_core::lexicon::Lexicon;
use fangzhi_core::linkage::{review_context, ClassificationWire};
use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{load_corpus, load_lexicon, load_vocab, read_file, CmdResult, Failure};
use crate::config::RunConfig;

pub const VERDICTS: [&str; 3] = ["confirmed", "rejected", "new_discovery"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub seq: u64,
    pub record_key: String,
    pub verdict: String,
    #[serde(default)]
    pub note: String,
    pub timestamp: u64,
}

#[derive(Debug, Deserialize)]
struct DecisionRequest {
    record_key: String,
    verdict: String,
    #[serde(default)]
    note: String,
}

/// Append-only decision store backed by a JSON Lines file.
#[derive(Debug)]
pub struct DecisionLog {
    file: File,
    entries: Vec<Decision>,
}

impl DecisionLog {
    /// Opens (or creates) the log and replays existing decisions.
    pub fn open(path: &Path) -> anyhow::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut entries = Vec::new();
        let mut keep_len = None;
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let lines: Vec<&str> = text.split_terminator('\n').collect();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Decision>(line) {
                    Ok(d) => entries.push(d),
                    // A final line without its newline is an interrupted write.
                    Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                        eprintln!("{}: ignoring incomplete final line", path.display());
                    }
                    Err(e) => return Err(anyhow!("{}:{}: {e}", path.display(), i + 1)),
                }
            }
            if !text.is_empty() && !text.ends_with('\n') {
                keep_len = Some(text.rfind('\n').map_or(0, |i| i + 1) as u64);
            }
        }
        if let Some(len) = keep_len {
            OpenOptions::new().write(true).open(path)?.set_len(len)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(DecisionLog { file, entries })
    }

    pub fn entries(&self) -> &[Decision] {
        &self.entries
    }

    pub fn latest_for(&self, key: &str) -> Option<&Decision> {
        self.entries.iter().rev().find(|d| d.record_key == key)
    }

    pub fn append(&mut self, record_key: String, verdict: String, note: String) -> anyhow::Result<Decision> {
        let decision = Decision {
            seq: self.entries.last().map_or(1, |d| d.seq + 1),
            record_key,
            verdict,
            note,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut line = serde_json::to_string(&decision)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.file.sync_data()?;
        self.entries.push(decision.clone());
        Ok(decision)
    }
}

pub struct AppState {
    vocab: DynastyVocab,
    items: Vec<ClassificationWire>,
    by_key: HashMap<String, usize>,
    passages: HashMap<String, Vec<Passage>>,
    lexicon: Option<Lexicon>,
    context: usize,
    decisions: Mutex<DecisionLog>,
}

pub struct Reply {
    pub status: u16,
    pub body: Value,
}

fn reply(status: u16, body: Value) -> Reply {
    Reply { status, body }
}

fn error(status: u16, message: impl Into<String>) -> Reply {
    reply(status, json!({ "error": message.into() }))
}

fn parse_query(query: &str) -> HashMap<String, String> {
    query
        .split('&')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap_or((kv, ""));
            let dec = |s: &str| percent_decode_str(&s.replace('+', " ")).decode_utf8_lossy().into_owned();
            (dec(k), dec(v))
        })
        .collect()
}

impl AppState {
    pub fn new(
        vocab: DynastyVocab,
        items: Vec<ClassificationWire>,
        corpus: &Corpus,
        lexicon: Option<Lexicon>,
        context: usize,
        decisions: DecisionLog,
    ) -> Self {
        let by_key = items
            .iter()
            .enumerate()
            .map(|(i, c)| (c.key.clone(), i))
            .collect();
        let passages = corpus
            .documents()
            .iter()
            .map(|d| (d.source_id.clone(), segment_passages(d)))
            .collect();
        AppState {
            vocab,
            items,
            by_key,
            passages,
            lexicon,
            context,
            decisions: Mutex::new(decisions),
        }
    }

    fn item_json(&self, item: &ClassificationWire, log: &DecisionLog) -> Value {
        let mut v = serde_json::to_value(item).expect("classification serializes");
        v["decision"] = match log.latest_for(&item.key) {
            Some(d) => serde_json::to_value(d).expect("decision serializes"),
            None => Value::Null,
        };
        v
    }

    pub fn handle(&self, method: &str, url: &str, body: &str) -> Reply {
        let (path, query) = url.split_once('?').unwrap_or((url, ""));
        let segments: Vec<String> = path
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
            .collect();
        let segs: Vec<&str> = segments.iter().map(String::as_str).collect();
        let query = parse_query(query);
        match (method, segs.as_slice()) {
            ("GET", []) => reply(
                200,
                json!({
                    "records": self.items.len(),
                    "endpoints": ["GET /records", "GET /records/{key}", "GET /passages/{source_id}/{index}", "GET /decisions", "POST /decisions"],
                }),
            ),
            ("GET", ["records"]) => self.list_records(&query),
            ("GET", ["records", key]) => self.get_record(key),
            ("GET", ["passages", source, index]) => self.get_passage(source, index),
            ("GET", ["decisions"]) => {
                let log = self.decisions.lock().expect("decision log lock");
                let list: Vec<&Decision> = log
                    .entries()
                    .iter()
                    .filter(|d| query.get("record_key").is_none_or(|k| &d.record_key == k))
                    .collect();
                reply(200, json!({ "decisions": list }))
            }
            ("POST", ["decisions"]) => self.post_decision(body),
            (_, ["records"] | ["records", _] | ["passages", _, _] | ["decisions"]) => {
                error(405, format!("{method} not allowed on {path}"))
            }
            _ => error(404, format!("no route for {path}")),
        }
    }

    fn list_records(&self, q: &HashMap<String, String>) -> Reply {
        let parse_num = |k: &str, default: usize| -> Result<usize, Reply> {
            match q.get(k) {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| error(400, format!("`{k}` must be a number"))),
            }
        };
        let type_filter = match q.get("type").or_else(|| q.get("type_code")) {
            None => None,
            Some(v) => match v.parse::<u8>() {
                Ok(t) if (1..=8).contains(&t) => Some(t),
                _ => return error(400, "`type` must be 1-8"),
            },
        };
        if let Some(d) = q.get("decision") {
            if d != "none" && !VERDICTS.contains(&d.as_str()) {
                return error(400, format!("unknown decision filter `{d}`"));
            }
        }
        let offset = match parse_num("offset", 0) {
            Ok(v) => v,
            Err(r) => return r,
        };
        let limit = match parse_num("limit", 50) {
            Ok(v) => v.clamp(1, 1000),
            Err(r) => return r,
        };
        let log = self.decisions.lock().expect("decision log lock");
        let matching: Vec<&ClassificationWire> = self
            .items
            .iter()
            .filter(|c| type_filter.is_none_or(|t| c.type_code == t))
            .filter(|c| q.get("source_id").is_none_or(|s| &c.record.source_id == s))
            .filter(|c| match q.get("decision").map(String::as_str) {
                None => true,
                Some("none") => log.latest_for(&c.key).is_none(),
                Some(v) => log.latest_for(&c.key).is_some_and(|d| d.verdict == v),
            })
            .collect();
        let page: Vec<Value> = matching
            .iter()
            .skip(offset)
            .take(limit)
            .map(|c| self.item_json(c, &log))
            .collect();
        reply(
            200,
            json!({ "total": matching.len(), "offset": offset, "limit": limit, "items": page }),
        )
    }

    fn get_record(&self, key: &str) -> Reply {
        let Some(&i) = self.by_key.get(key) else {
            return error(404, format!("unknown record `{key}`"));
        };
        let item = &self.items[i];
        let r = &item.record;
        let context = self
            .passages
            .get(&r.source_id)
            .and_then(|ps| ps.get(r.passage_index))
            .and_then(|p| {
                review_context(
                    p,
                    (r.name_span[0], r.name_span[1]),
                    r.style_span.map(|[a, b]| (a, b)),
                    self.context,
                )
            });
        let log = self.decisions.lock().expect("decision log lock");
        let mut v = self.item_json(item, &log);
        v["context_available"] = context.is_some().into();
        v["context"] = serde_json::to_value(context).expect("context serializes");
        reply(200, v)
    }

    fn get_passage(&self, source: &str, index: &str) -> Reply {
        let Ok(index) = index.parse::<usize>() else {
            return error(404, format!("no passage `{index}`"));
        };
        let Some(p) = self.passages.get(source).and_then(|ps| ps.get(index)) else {
            return error(404, format!("no passage {source}/{index}"));
        };
        let spans: Vec<Value> = self
            .lexicon
            .as_ref()
            .map(|lex| {
                lex.scan(p)
                    .iter()
                    .map(|s| {
                        json!({
                            "start": s.start,
                            "end": s.end,
                            "label": s.label,
                            "surface": s.surface,
                            "dynasties": s.dynasties.iter().map(|d| self.vocab.chinese(d)).collect::<Vec<_>>(),
                        })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let records: Vec<&str> = self
            .items
            .iter()
            .filter(|c| c.record.source_id == source && c.record.passage_index == index)
            .map(|c| c.key.as_str())
            .collect();
        reply(
            200,
            json!({
                "source_id": p.source_id,
                "index": p.index,
                "start": p.start,
                "end": p.end,
                "content": p.content,
                "spans": spans,
                "records": records,
            }),
        )
    }

    fn post_decision(&self, body: &str) -> Reply {
        let req: DecisionRequest = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return error(400, format!("malformed decision: {e}")),
        };
        if !VERDICTS.contains(&req.verdict.as_str()) {
            return error(
                400,
                format!("verdict must be one of {}", VERDICTS.join(", ")),
            );
        }
        if !self.by_key.contains_key(&req.record_key) {
            return error(404, format!("unknown record `{}`", req.record_key));
        }
        let mut log = self.decisions.lock().expect("decision log lock");
        match log.append(req.record_key, req.verdict, req.note) {
            Ok(d) => reply(201, serde_json::to_value(d).expect("decision serializes")),
            Err(e) => error(500, format!("could not persist decision: {e}")),
        }
    }
}

/// Builds the endpoint state from the outputs of `extract` and `match`.
pub fn load_state(cfg: &RunConfig) -> CmdResult<AppState> {
    let vocab = load_vocab(cfg)?;
    let path = cfg.classifications_path();
    let text = read_file(&path)?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let wire: ClassificationWire = serde_json::from_str(line)
            .map_err(|e| Failure::Config(anyhow!("{}:{}: {e}", path.display(), i + 1)))?;
        items.push(wire);
    }
    let corpus = if cfg.corpus.is_empty() {
        Corpus::default()
    } else {
        cfg.require(&["corpus"]).map_err(Failure::Config)?;
        load_corpus(cfg)?
    };
    let lexicon = if cfg.lexicon.is_empty() {
        None
    } else {
        cfg.require(&["lexicon"]).map_err(Failure::Config)?;
        Some(load_lexicon(cfg, vocab.clone())?)
    };
    let log = DecisionLog::open(&cfg.decisions_path()).map_err(Failure::Io)?;
    Ok(AppState::new(vocab, items, &corpus, lexicon, cfg.context, log))
}

const WORKERS: usize = 4;

/// Serves until the process is stopped. Prints the bound address on stdout.
pub fn cmd_serve(cfg: &RunConfig) -> CmdResult<()> {
    let state = Arc::new(load_state(cfg)?);
    let server = tiny_http::Server::http(("127.0.0.1", cfg.port))
        .map_err(|e| Failure::Io(anyhow!("binding 127.0.0.1:{}: {e}", cfg.port)))?;
    let addr = server.server_addr();
    println!("listening on http://{addr}");
    let _ = std::io::stdout().flush();

    let server = Arc::new(server);
    let workers: Vec<_> = (0..WORKERS)
        .map(|_| {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let r = if request.as_reader().read_to_string(&mut body).is_err() {
                        error(400, "request body is not UTF-8")
                    } else {
                        state.handle(request.method().as_str(), request.url(), &body)
                    };
                    let header = tiny_http::Header::from_bytes(
                        &b"Content-Type"[..],
                        &b"application/json; charset=utf-8"[..],
                    )
                    .expect("static header is valid");
                    let response = tiny_http::Response::from_string(r.body.to_string())
                        .with_status_code(r.status)
                        .with_header(header);
                    if let Err(e) = request.respond(response) {
                        eprintln!("serve: failed to respond: {e}");
                    }
                }
            })
        })
        .collect();
    for w in workers {
        w.join()
            .map_err(|_| Failure::Internal(anyhow!("worker thread panicked")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_log_survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.jsonl");
        {
            let mut log = DecisionLog::open(&path).unwrap();
            log.append("k1".into(), "rejected".into(), "".into()).unwrap();
            log.append("k1".into(), "confirmed".into(), "checked".into()).unwrap();
        }
        // Simulate an interrupted write.
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":3,\"record_k").unwrap();
        drop(f);

        let mut log = DecisionLog::open(&path).unwrap();
        assert_eq!(log.entries().len(), 2);
        assert_eq!(log.latest_for("k1").unwrap().verdict, "confirmed");
        let d = log.append("k2".into(), "new_discovery".into(), "".into()).unwrap();
        assert_eq!(d.seq, 3);
        drop(log);
        let log = DecisionLog::open(&path).unwrap();
        let seqs: Vec<u64> = log.entries().iter().map(|d| d.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
    }

    #[test]
    fn query_parsing_decodes() {
        let q = parse_query("source_id=%E9%A0%86%E5%BE%B7&type=2&x");
        assert_eq!(q["source_id"], "順德");
        assert_eq!(q["type"], "2");
        assert_eq!(q["x"], "");
    }
}
