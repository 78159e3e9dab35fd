use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use anyhow::Context;
use mtsel_core::corpus::{normalize, tokenize, Lang};
use mtsel_core::external::{self, EmbeddingTable, StreamOptions};
use mtsel_core::geometry::{score_fd, DistanceMetric};
use mtsel_core::lexical::{score_avg_idf, score_mean_tfidf, SideSelector};
use mtsel_core::lm::{score_moore_lewis, SideModels, DEFAULT_ALPHA, DEFAULT_ORDER};
use mtsel_core::metrics::ter;
use mtsel_core::scores::file_digest;
use mtsel_core::{Direction, Error, ParallelCorpus, ScoreColumn, ScoreTable, SelectionResult};
use rayon::prelude::*;

use crate::args::ScoreArgs;
use crate::exit::config_error;
use crate::{require_file, Env};

pub const METHODS: &[&str] = &["tfidf", "avg-idf", "fd", "moore-lewis", "ter", "semantic", "kiwi", "qurate"];
const EXTERNAL: &[&str] = &["kiwi", "qurate"];

pub fn run(env: &Env, args: ScoreArgs) -> anyhow::Result<()> {
    if args.method.is_empty() {
        return Err(config_error("score needs at least one --method"));
    }
    let mut methods: Vec<String> = Vec::new();
    for m in &args.method {
        if !METHODS.contains(&m.as_str()) {
            return Err(config_error(format!("unknown scorer `{m}` (known: {})", METHODS.join(", "))));
        }
        if methods.contains(m) {
            return Err(config_error(format!("scorer `{m}` given twice")));
        }
        methods.push(m.clone());
    }

    let corpus_path = env.default_path(args.corpus.clone(), "corpus.jsonl");
    let table_path = env.default_path(args.table.clone(), "scores.csv");
    require_file(&corpus_path, "corpus")?;
    let corpus = ParallelCorpus::load_jsonl(&corpus_path)?;
    let corpus_digest = file_digest(&corpus_path)?;

    let mut table = if table_path.exists() {
        let t = ScoreTable::load(&table_path)?;
        if t.n_docs() != corpus.n_docs() {
            return Err(Error::Domain(format!(
                "table {} has {} rows but the corpus has {} pairs",
                table_path.display(),
                t.n_docs(),
                corpus.n_docs()
            ))
            .into());
        }
        t
    } else {
        ScoreTable::new(corpus.n_docs())
    };
    for m in &methods {
        if table.contains(m) && !args.force {
            return Err(Error::ColumnExists(m.clone())).context("pass --force to replace it");
        }
    }

    let externals = ExternalSources::parse(&args, &methods)?;
    for m in &methods {
        let column = score_one(m, &corpus, &args, &externals)?.with_flag("corpus", &corpus_digest);
        table.insert(column, args.force)?;
        eprintln!("scored {m}");
    }
    if let Some(dir) = table_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    table.save(&table_path)?;
    Ok(())
}

fn score_one(method: &str, corpus: &ParallelCorpus, args: &ScoreArgs, ext: &ExternalSources) -> anyhow::Result<ScoreColumn> {
    let side = args.side.unwrap_or_default();
    let column = match method {
        "tfidf" => ScoreColumn::new(method, Direction::HigherBetter, score_mean_tfidf(corpus, side)).with_flag("side", side),
        "avg-idf" => ScoreColumn::new(method, Direction::HigherBetter, score_avg_idf(corpus, side)).with_flag("side", side),
        "fd" => {
            let metric = if args.cosine_distance {
                DistanceMetric::Cosine
            } else {
                DistanceMetric::Euclidean
            };
            ScoreColumn::new(method, Direction::HigherBetter, score_fd(corpus, side, metric)?)
                .with_flag("side", side)
                .with_flag("metric", metric)
        }
        "moore-lewis" => moore_lewis(corpus, args, side)?,
        "ter" => ter_column(corpus, args)?,
        "semantic" => semantic(corpus, args)?,
        _ => ext.score(method, corpus, args)?,
    };
    column.validate()?;
    Ok(column)
}

fn moore_lewis(corpus: &ParallelCorpus, args: &ScoreArgs, side: SideSelector) -> anyhow::Result<ScoreColumn> {
    let (Some(in_path), Some(out_path)) = (&args.in_domain, &args.out_domain) else {
        return Err(config_error("moore-lewis needs --in-domain and --out-domain corpora"));
    };
    let order = args.lm_order.unwrap_or(DEFAULT_ORDER);
    let alpha = args.lm_alpha.unwrap_or(DEFAULT_ALPHA);
    if order == 0 || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(config_error("--lm-order must be at least 1 and --lm-alpha positive"));
    }
    require_file(in_path, "in-domain corpus")?;
    require_file(out_path, "out-of-domain corpus")?;
    let lms_in = SideModels::train(&ParallelCorpus::load_jsonl(in_path)?, order, alpha)?;
    let lms_out = SideModels::train(&ParallelCorpus::load_jsonl(out_path)?, order, alpha)?;
    let scores = score_moore_lewis(corpus, &lms_in, &lms_out, side)?;
    Ok(ScoreColumn::new("moore-lewis", Direction::HigherBetter, scores)
        .with_flag("side", side)
        .with_flag("order", order)
        .with_flag("alpha", format!("{alpha:?}"))
        .with_flag("in_domain", file_digest(in_path)?)
        .with_flag("out_domain", file_digest(out_path)?))
}

/// TER of a machine translation of each source sentence against the target side.
fn ter_column(corpus: &ParallelCorpus, args: &ScoreArgs) -> anyhow::Result<ScoreColumn> {
    let path = args
        .hypotheses
        .as_ref()
        .ok_or_else(|| config_error("ter needs --hypotheses (one translation per pair)"))?;
    require_file(path, "hypotheses")?;
    let lang = args.hyp_lang.unwrap_or(Lang::En);
    let lines = read_lines(path)?;
    if lines.len() != corpus.n_docs() {
        return Err(Error::Domain(format!(
            "{} has {} lines but the corpus has {} pairs",
            path.display(),
            lines.len(),
            corpus.n_docs()
        ))
        .into());
    }
    let scores = corpus
        .pairs()
        .par_iter()
        .zip(lines.par_iter())
        .map(|(pair, hyp)| ter(&tokenize(&normalize(hyp), lang), &pair.target_tokens))
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(ScoreColumn::new("ter", Direction::LowerBetter, scores)
        .with_flag("hyp_lang", lang)
        .with_flag("hypotheses", file_digest(path)?))
}

fn semantic(corpus: &ParallelCorpus, args: &ScoreArgs) -> anyhow::Result<ScoreColumn> {
    let (Some(emb_path), Some(ids_path)) = (&args.embeddings, &args.in_domain_ids) else {
        return Err(config_error("semantic needs --embeddings and --in-domain-ids"));
    };
    require_file(emb_path, "embeddings")?;
    require_file(ids_path, "in-domain ids")?;
    let embeddings = EmbeddingTable::load(emb_path)?;
    let ids = read_ids(ids_path)?;
    let column = external::semantic_similarity_scores(&embeddings, &ids, corpus.n_docs(), "semantic")?;
    Ok(column
        .with_flag("embeddings", file_digest(emb_path)?)
        .with_flag("in_domain_ids", file_digest(ids_path)?))
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Ids from a selection file, or one integer per line.
fn read_ids(path: &Path) -> anyhow::Result<Vec<usize>> {
    let lines = read_lines(path)?;
    if lines.iter().find(|l| !l.trim().is_empty()).is_some_and(|l| l.trim_start().starts_with('{')) {
        return Ok(SelectionResult::load(path)?.selected);
    }
    lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|e| {
                Error::Malformed {
                    row: i + 1,
                    reason: format!("not a pair id: {e}"),
                }
                .into()
            })
        })
        .collect()
}

enum Source {
    File(PathBuf),
    Process(String),
}

/// Where each external method gets its scores from.
struct ExternalSources {
    sources: Vec<(String, Source)>,
}

impl ExternalSources {
    fn parse(args: &ScoreArgs, methods: &[String]) -> anyhow::Result<Self> {
        let wanted: Vec<&str> = methods.iter().map(String::as_str).filter(|m| EXTERNAL.contains(m)).collect();
        let mut sources: Vec<(String, Source)> = Vec::new();
        let entries = args
            .scores
            .iter()
            .map(|s| (s, true))
            .chain(args.scorer_cmd.iter().map(|s| (s, false)));
        for (entry, is_file) in entries {
            let (method, value) = match entry.split_once('=') {
                Some((m, v)) if EXTERNAL.contains(&m) => (m.to_owned(), v.to_owned()),
                _ if wanted.len() == 1 => (wanted[0].to_owned(), entry.clone()),
                _ => {
                    return Err(config_error(format!(
                        "`{entry}` does not say which method it feeds; write METHOD=VALUE"
                    )))
                }
            };
            if !wanted.contains(&method.as_str()) {
                return Err(config_error(format!("scores given for `{method}` but it is not a requested method")));
            }
            if sources.iter().any(|(m, _)| *m == method) {
                return Err(config_error(format!("more than one score source for `{method}`")));
            }
            let source = if is_file {
                let path = PathBuf::from(value);
                require_file(&path, "score file")?;
                Source::File(path)
            } else {
                Source::Process(value)
            };
            sources.push((method, source));
        }
        for m in wanted {
            if !sources.iter().any(|(s, _)| s == m) {
                return Err(config_error(format!("{m} needs --scores or --scorer-cmd")));
            }
        }
        Ok(ExternalSources { sources })
    }

    fn score(&self, method: &str, corpus: &ParallelCorpus, args: &ScoreArgs) -> anyhow::Result<ScoreColumn> {
        let range = match &args.range {
            Some(text) => Some(parse_range(text)?),
            None if method == "kiwi" => Some((0.0, 1.0)),
            None => None,
        };
        let (_, source) = self.sources.iter().find(|(m, _)| m == method).expect("validated in parse");
        let mut column = match source {
            Source::File(path) => {
                external::load_scores(path, method, Direction::HigherBetter, corpus.n_docs(), range)?
                    .with_flag("scores", file_digest(path)?)
            }
            Source::Process(cmd) => {
                let defaults = StreamOptions::default();
                let options = StreamOptions {
                    window: args.scorer_window.unwrap_or(defaults.window),
                    timeout: args.scorer_timeout.map(Duration::from_secs).unwrap_or(defaults.timeout),
                    direction: Direction::HigherBetter,
                    range,
                };
                let mut command = Command::new("sh");
                command.arg("-c").arg(cmd);
                // every stream failure, including bad responses, is the scorer's fault
                external::stream_score(corpus, command, method, &options)
                    .map_err(|e| match e {
                        Error::Scorer(msg) => Error::Scorer(msg),
                        other => Error::Scorer(other.to_string()),
                    })?
                    .with_flag("scorer_cmd", cmd)
            }
        };
        if method == "qurate" {
            let side = args.rated_side.as_deref().unwrap_or("target");
            if !["source", "target", "pair"].contains(&side) {
                return Err(config_error(format!("--rated-side must be source, target or pair, not `{side}`")));
            }
            column = column.with_flag("side", side);
        }
        Ok(column)
    }
}

fn parse_range(text: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || config_error(format!("--range expects LO,HI, got `{text}`"));
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
