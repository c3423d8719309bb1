//! `fangzhi`: annotate, extract, match, report and serve.

mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdResult, Failure};
use config::{Layers, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fangzhi", version, about = "Mine person records from local gazetteers")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus files or directories, comma separated
    #[arg(long, global = true)]
    corpus: Option<String>,
    /// Document metadata TSV (source_id, title, period)
    #[arg(long, global = true)]
    metadata: Option<String>,
    /// Lexicon TSV files, comma separated
    #[arg(long, global = true)]
    lexicon: Option<String>,
    /// Reference person table TSV
    #[arg(long, global = true)]
    reference: Option<String>,
    /// Pattern and grammar-rule TSV
    #[arg(long, global = true)]
    patterns: Option<String>,
    /// Dynasty vocabulary TSV
    #[arg(long, global = true)]
    dynasties: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Records file (default <out>/records.jsonl)
    #[arg(long, global = true)]
    records: Option<String>,
    /// Decision log (default <out>/decisions.jsonl)
    #[arg(long, global = true)]
    decisions: Option<String>,
    #[arg(long, global = true)]
    ngram_n: Option<String>,
    #[arg(long, global = true)]
    subseq_k: Option<String>,
    /// Candidate enumeration cap for lattice dumps
    #[arg(long, global = true)]
    cap: Option<String>,
    /// Minimum dynasty-bearing spans for a consistent sequence
    #[arg(long, global = true)]
    min_evidence: Option<String>,
    /// Context characters on each side in review output
    #[arg(long, global = true)]
    context: Option<String>,
    #[arg(long, global = true)]
    port: Option<String>,
    /// Include type-1 records in the review batch
    #[arg(long, global = true)]
    include_type1: bool,
    /// Also write per-passage lattice dumps when annotating
    #[arg(long, global = true)]
    dump_lattice: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write annotated passages to <out>/annotated/
    Annotate,
    /// Extract records plus n-gram and subsequence statistics
    Extract,
    /// Classify records against the reference table
    Match,
    /// Print the type distribution of classified records
    Report {
        #[arg(long)]
        tsv: bool,
    },
    /// Serve records and accept review decisions over HTTP
    Serve,
}

impl GlobalArgs {
    fn layers(&self) -> anyhow::Result<Layers> {
        let mut layers = match &self.config {
            Some(p) => Layers::load_file(p)?,
            None => Layers::default(),
        };
        layers.overlay_env(std::env::vars());
        let flags = [
            ("corpus", &self.corpus),
            ("metadata", &self.metadata),
            ("lexicon", &self.lexicon),
            ("reference", &self.reference),
            ("patterns", &self.patterns),
            ("dynasties", &self.dynasties),
            ("out", &self.out),
            ("records", &self.records),
            ("decisions", &self.decisions),
            ("ngram_n", &self.ngram_n),
            ("subseq_k", &self.subseq_k),
            ("cap", &self.cap),
            ("min_evidence", &self.min_evidence),
            ("context", &self.context),
            ("port", &self.port),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                layers.set(key, v.clone());
            }
        }
        if self.include_type1 {
            layers.set("include_type1", "true");
        }
        if self.dump_lattice {
            layers.set("dump_lattice", "true");
        }
        Ok(layers)
    }
}

fn run(cli: Cli) -> CmdResult<()> {
    let cfg = cli
        .global
        .layers()
        .and_then(|l| RunConfig::from_layers(&l))
        .map_err(Failure::Config)?;
    match cli.command {
        Command::Annotate => commands::cmd_annotate(&cfg).map(drop),
        Command::Extract => commands::cmd_extract(&cfg).map(drop),
        Command::Match => commands::cmd_match(&cfg).map(drop),
        Command::Report { tsv } => {
            print!("{}", commands::cmd_report(&cfg, tsv)?);
            Ok(())
        }
        Command::Serve => serve::cmd_serve(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fangzhi: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
