//! Command-line arguments and the optional TOML config file.
//!
//! Every subcommand's flags can also be given in the config file, in a table
//! named after the subcommand (`[ingest]`, `[score]`, ...) with the flag names
//! in snake_case. Flags on the command line win over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mtsel_core::analysis::ReportFormat;
use mtsel_core::corpus::{InputFormat, Lang, NormalizationForm};
use mtsel_core::lexical::SideSelector;
use serde::Deserialize;

use crate::exit::config_error;

#[derive(Debug, Parser)]
#[command(name = "mtsel", version, about = "Score, select and analyze parallel-corpus training data")]
pub struct Cli {
    /// TOML file with defaults for any subcommand flag.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel scoring (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Directory for all written artifacts (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, normalize and tokenize a parallel corpus.
    Ingest(IngestArgs),
    /// Compute score columns and add them to a score table.
    Score(ScoreArgs),
    /// Pick the top-k pairs of one column, or a seeded random sample.
    Select(SelectArgs),
    /// Uniqueness across selections, score statistics and BLEU.
    Analyze(AnalyzeArgs),
    /// Render a full report of corpus, columns and selections.
    Report(ReportArgs),
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestArgs {
    /// Parallel corpus: TSV (source<TAB>target) or JSONL ({"src","tgt"[,"id"]}).
    pub input: Option<PathBuf>,

    /// Input format (default: from the file extension).
    #[arg(long)]
    pub format: Option<InputFormat>,

    #[arg(long, value_name = "LANG")]
    pub src_lang: Option<Lang>,

    #[arg(long, value_name = "LANG")]
    pub tgt_lang: Option<Lang>,

    /// Both sides are already space-separated tokens.
    #[arg(long)]
    pub pretokenized: bool,

    /// Tokens kept per side (default 512).
    #[arg(long, value_name = "N")]
    pub max_tokens: Option<usize>,

    /// Unicode normalization form: nfc (default) or nfkc.
    #[arg(long, value_name = "FORM")]
    pub normalization: Option<NormalizationForm>,

    /// Stem of the written files (default "corpus").
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreArgs {
    /// Ingested corpus (default: <output-dir>/corpus.jsonl).
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,

    /// Score table to create or extend (default: <output-dir>/scores.csv).
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,

    /// Scorer(s) to run: tfidf, avg-idf, fd, moore-lewis, ter, semantic, kiwi, qurate.
    #[arg(short, long = "method", value_name = "NAME", value_delimiter = ',', required = false)]
    #[serde(alias = "methods")]
    pub method: Vec<String>,

    /// Side used by tfidf, avg-idf, fd and moore-lewis: source, target or both.
    #[arg(long)]
    pub side: Option<SideSelector>,

    /// FD-Score measures cosine distance instead of Euclidean.
    #[arg(long)]
    pub cosine_distance: bool,

    #[arg(long, value_name = "N")]
    pub lm_order: Option<usize>,

    #[arg(long, value_name = "ALPHA")]
    pub lm_alpha: Option<f64>,

    /// Ingested in-domain corpus for moore-lewis.
    #[arg(long, value_name = "PATH")]
    pub in_domain: Option<PathBuf>,

    /// Ingested out-of-domain corpus for moore-lewis.
    #[arg(long, value_name = "PATH")]
    pub out_domain: Option<PathBuf>,

    /// Machine translations of the source side, one line per pair, for ter.
    #[arg(long, value_name = "PATH")]
    pub hypotheses: Option<PathBuf>,

    /// Language used to tokenize hypotheses (default en).
    #[arg(long, value_name = "LANG")]
    pub hyp_lang: Option<Lang>,

    /// Embeddings JSONL ({"id","vec"}) for semantic.
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,

    /// In-domain pair ids for semantic: one id per line, or a selection file.
    #[arg(long, value_name = "PATH")]
    pub in_domain_ids: Option<PathBuf>,

    /// Precomputed scores for an external method, as [METHOD=]PATH.
    #[arg(long, value_name = "[METHOD=]PATH")]
    pub scores: Vec<String>,

    /// Scorer process for an external method, as [METHOD=]COMMAND (run by sh -c).
    #[arg(long, value_name = "[METHOD=]COMMAND")]
    pub scorer_cmd: Vec<String>,

    /// Declared score range LO,HI for external methods (kiwi defaults to 0,1).
    #[arg(long, value_name = "LO,HI")]
    pub range: Option<String>,

    /// Side rated by the quality-rating model: source, target (default) or pair.
    #[arg(long, value_name = "SIDE")]
    pub rated_side: Option<String>,

    /// Requests in flight to a scorer process (default 256).
    #[arg(long, value_name = "N")]
    pub scorer_window: Option<usize>,

    /// Seconds to wait for each scorer response (default 300).
    #[arg(long, value_name = "SECS")]
    pub scorer_timeout: Option<u64>,

    /// Replace columns that already exist in the table.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectArgs {
    /// Column to rank by, or "random".
    #[arg(short, long, value_name = "NAME")]
    pub method: Option<String>,

    /// Budget: number of pairs to select.
    #[arg(short, long)]
    pub k: Option<usize>,

    /// Seed for the random baseline (default 42).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Score table (default: <output-dir>/scores.csv).
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,

    /// Corpus whose size bounds a random sample (alternative to --table).
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,

    /// Corpus size for a random sample without any input file.
    #[arg(long, value_name = "N")]
    pub n_docs: Option<usize>,

    /// Also write the full ranking.
    #[arg(long)]
    pub emit_ranking: bool,

    /// Selection file (default: <output-dir>/select_<method>.jsonl).
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Selection files to compare (at least two).
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub selections: Vec<PathBuf>,

    /// Uniqueness table format: markdown (default), csv or json.
    #[arg(long)]
    pub format: Option<ReportFormat>,

    /// Score table for --stats (default: <output-dir>/scores.csv).
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,

    /// Distribution statistics of these columns.
    #[arg(long, value_name = "COLUMN", value_delimiter = ',')]
    pub stats: Vec<String>,

    /// Restrict --stats to the pairs of this selection file.
    #[arg(long, value_name = "PATH")]
    pub subset: Option<PathBuf>,

    /// Histogram bins (default 20).
    #[arg(long)]
    pub bins: Option<usize>,

    /// System outputs for corpus BLEU, one line per segment.
    #[arg(long, value_name = "PATH", requires = "bleu_ref")]
    pub bleu_hyp: Option<PathBuf>,

    /// References for corpus BLEU, one line per segment.
    #[arg(long, value_name = "PATH", requires = "bleu_hyp")]
    pub bleu_ref: Option<PathBuf>,

    /// Language used to tokenize BLEU inputs (default en).
    #[arg(long, value_name = "LANG")]
    pub bleu_lang: Option<Lang>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    /// Ingested corpus, for its statistics.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,

    /// Selection files to include.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    pub selections: Vec<PathBuf>,

    /// Score table whose columns are summarized.
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,

    /// Only these columns of the table (default: all).
    #[arg(long, value_name = "COLUMN", value_delimiter = ',')]
    pub columns: Vec<String>,

    /// markdown (default), csv or json.
    #[arg(long)]
    pub format: Option<ReportFormat>,

    /// Histogram bins (default 20).
    #[arg(long)]
    pub bins: Option<usize>,

    /// Report file (default: <output-dir>/report.<ext>).
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub ingest: IngestArgs,
    pub score: ScoreArgs,
    pub select: SelectArgs,
    pub analyze: AnalyzeArgs,
    pub report: ReportArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fills unset command-line values from the config file.
macro_rules! fill {
    ($cli:expr, $cfg:expr; opt: $($o:ident),*; flag: $($f:ident),*; list: $($l:ident),*) => {
        $( if $cli.$o.is_none() { $cli.$o = $cfg.$o.take(); } )*
        $( $cli.$f = $cli.$f || $cfg.$f; )*
        $( if $cli.$l.is_empty() { $cli.$l = std::mem::take(&mut $cfg.$l); } )*
    };
}

impl IngestArgs {
    pub fn merge(&mut self, mut cfg: IngestArgs) {
        fill!(self, cfg;
            opt: input, format, src_lang, tgt_lang, max_tokens, normalization, name;
            flag: pretokenized;
            list:);
    }
}

impl ScoreArgs {
    pub fn merge(&mut self, mut cfg: ScoreArgs) {
        fill!(self, cfg;
            opt: corpus, table, side, lm_order, lm_alpha, in_domain, out_domain, hypotheses, hyp_lang,
                embeddings, in_domain_ids, range, rated_side, scorer_window, scorer_timeout;
            flag: cosine_distance, force;
            list: method, scores, scorer_cmd);
    }
}

impl SelectArgs {
    pub fn merge(&mut self, mut cfg: SelectArgs) {
        fill!(self, cfg;
            opt: method, k, seed, table, corpus, n_docs, output;
            flag: emit_ranking;
            list:);
    }
}

impl AnalyzeArgs {
    pub fn merge(&mut self, mut cfg: AnalyzeArgs) {
        fill!(self, cfg;
            opt: format, table, subset, bins, bleu_hyp, bleu_ref, bleu_lang;
            flag:;
            list: selections, stats);
    }
}

impl ReportArgs {
    pub fn merge(&mut self, mut cfg: ReportArgs) {
        fill!(self, cfg;
            opt: corpus, table, format, bins, output;
            flag:;
            list: selections, columns);
    }
}
