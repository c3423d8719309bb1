//! Run configuration.
//!
//! Values come from, in increasing precedence: built-in defaults, a flat
//! `key = value` config file, `FANGZHI_<KEY>` environment variables, and
//! command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

pub const ENV_PREFIX: &str = "FANGZHI_";

pub const KEYS: &[&str] = &[
    "corpus",
    "metadata",
    "lexicon",
    "reference",
    "patterns",
    "dynasties",
    "out",
    "records",
    "decisions",
    "ngram_n",
    "subseq_k",
    "cap",
    "min_evidence",
    "context",
    "port",
    "include_type1",
    "dump_lattice",
];

/// Raw key/value layers before validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layers {
    values: BTreeMap<String, String>,
}

impl Layers {
    pub fn parse_file_text(text: &str, origin: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected `key = value`", i + 1))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                bail!("{origin}:{}: unknown key `{}`", i + 1, k.trim());
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Layers { values })
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_file_text(&text, &path.display().to_string())
    }

    pub fn overlay_env(&mut self, env: impl IntoIterator<Item = (String, String)>) {
        for (k, v) in env {
            if let Some(key) = k.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                if KEYS.contains(&key.as_str()) {
                    self.values.insert(key, v);
                }
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn paths(&self, key: &str) -> Vec<PathBuf> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            })
            .unwrap_or_default()
    }

    fn positive(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| anyhow!("`{key}` must be a positive integer, got `{v}`")),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("1" | "true" | "yes" | "on") => Ok(true),
            Some("0" | "false" | "no" | "off") => Ok(false),
            Some(v) => bail!("`{key}` must be a boolean, got `{v}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub lexicon: Vec<PathBuf>,
    pub reference: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub dynasties: Option<PathBuf>,
    pub out: PathBuf,
    pub records: Option<PathBuf>,
    pub decisions: Option<PathBuf>,
    pub ngram_n: usize,
    pub subseq_k: usize,
    pub cap: usize,
    pub min_evidence: usize,
    pub context: usize,
    pub port: u16,
    pub include_type1: bool,
    pub dump_lattice: bool,
}

impl RunConfig {
    pub fn from_layers(l: &Layers) -> Result<Self> {
        let port = match l.get("port") {
            None => 8737,
            Some(v) => v
                .parse::<u16>()
                .map_err(|_| anyhow!("`port` must be a port number, got `{v}`"))?,
        };
        let subseq_k = l.positive("subseq_k", 4)?;
        if subseq_k < 2 {
            bail!("`subseq_k` must be at least 2");
        }
        Ok(RunConfig {
            corpus: l.paths("corpus"),
            metadata: l.get("metadata").map(PathBuf::from),
            lexicon: l.paths("lexicon"),
            reference: l.get("reference").map(PathBuf::from),
            patterns: l.get("patterns").map(PathBuf::from),
            dynasties: l.get("dynasties").map(PathBuf::from),
            out: l.get("out").map(PathBuf::from).unwrap_or_else(|| "out".into()),
            records: l.get("records").map(PathBuf::from),
            decisions: l.get("decisions").map(PathBuf::from),
            ngram_n: l.positive("ngram_n", 6)?,
            subseq_k,
            cap: l.positive("cap", 4096)?,
            min_evidence: l.positive("min_evidence", 2)?,
            context: l.positive("context", 30)?,
            port,
            include_type1: l.flag("include_type1")?,
            dump_lattice: l.flag("dump_lattice")?,
        })
    }

    pub fn records_path(&self) -> PathBuf {
        self.records
            .clone()
            .unwrap_or_else(|| self.out.join("records.jsonl"))
    }

    pub fn classifications_path(&self) -> PathBuf {
        self.out.join("classifications.jsonl")
    }

    pub fn decisions_path(&self) -> PathBuf {
        self.decisions
            .clone()
            .unwrap_or_else(|| self.out.join("decisions.jsonl"))
    }

    /// Checks that the inputs a command needs are configured and exist.
    pub fn require(&self, needs: &[&str]) -> Result<()> {
        for &need in needs {
            match need {
                "corpus" if self.corpus.is_empty() => bail!("no corpus configured (--corpus)"),
                "lexicon" if self.lexicon.is_empty() => bail!("no lexicon configured (--lexicon)"),
                "reference" if self.reference.is_none() => {
                    bail!("no reference table configured (--reference)")
                }
                _ => {}
            }
        }
        let mut check: Vec<&Path> = Vec::new();
        if needs.contains(&"corpus") {
            check.extend(self.corpus.iter().map(PathBuf::as_path));
        }
        if needs.contains(&"lexicon") {
            check.extend(self.lexicon.iter().map(PathBuf::as_path));
        }
        if needs.contains(&"reference") {
            check.extend(self.reference.as_deref());
        }
        check.extend(self.metadata.as_deref());
        check.extend(self.patterns.as_deref());
        check.extend(self.dynasties.as_deref());
        for p in check {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
        }
        Ok(())
    }
}
