use std::path::{Path, PathBuf};

use anyhow::Context;
use mtsel_core::analysis::{distribution_stats, Report, ReportFormat, DEFAULT_BINS};
use mtsel_core::corpus::{normalize, tokenize, Lang};
use mtsel_core::metrics::corpus_bleu;
use mtsel_core::{Error, ParallelCorpus, ScoreColumn, ScoreTable, SelectionResult};
use serde_json::json;

use crate::args::{AnalyzeArgs, ReportArgs};
use crate::exit::config_error;
use crate::{require_file, Env};

fn load_selections(paths: &[PathBuf]) -> anyhow::Result<Vec<SelectionResult>> {
    paths
        .iter()
        .map(|p| {
            require_file(p, "selection")?;
            Ok(SelectionResult::load(p)?)
        })
        .collect()
}

fn load_table(env: &Env, path: Option<PathBuf>) -> anyhow::Result<ScoreTable> {
    let path = env.default_path(path, "scores.csv");
    require_file(&path, "score table")?;
    Ok(ScoreTable::load(&path)?)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn analyze(env: &Env, args: AnalyzeArgs) -> anyhow::Result<()> {
    if args.selections.is_empty() && args.stats.is_empty() && args.bleu_hyp.is_none() {
        return Err(config_error("analyze needs --selections, --stats or --bleu-hyp/--bleu-ref"));
    }
    let bins = args.bins.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(config_error("--bins must be at least 1"));
    }

    if !args.selections.is_empty() {
        if args.selections.len() < 2 {
            return Err(config_error("uniqueness analysis needs at least two selection files"));
        }
        let format = args.format.unwrap_or(ReportFormat::Markdown);
        let selections = load_selections(&args.selections)?;
        let report = Report::build(None, &selections, &[], bins)?;
        let text = report.render(format);
        write(&env.output(&format!("uniqueness.{}", format.extension()))?, &text)?;
        print!("{text}");
    }

    if !args.stats.is_empty() {
        let table = load_table(env, args.table)?;
        let subset = match &args.subset {
            Some(p) => load_selections(std::slice::from_ref(p))?.pop(),
            None => None,
        };
        for name in &args.stats {
            let column = table.column(name)?;
            let (scores, stem) = match &subset {
                Some(sel) => {
                    let mut picked = Vec::with_capacity(sel.selected.len());
                    for &id in &sel.selected {
                        let s = column.get(id).ok_or_else(|| Error::UnknownIds {
                            method: sel.method.clone(),
                            ids: vec![id],
                        })?;
                        picked.push(s);
                    }
                    (picked, format!("{name}.{}", sel.method))
                }
                None => (column.scores.clone(), name.clone()),
            };
            let stats = distribution_stats(&scores, bins)?;
            let json = serde_json::to_string_pretty(&stats)?;
            write(&env.output(&format!("{stem}.stats.json"))?, &format!("{json}\n"))?;
            write(&env.output(&format!("{stem}.histogram.csv"))?, &stats.histogram_csv())?;
            println!("{json}");
        }
    }

    if let (Some(hyp), Some(reference)) = (&args.bleu_hyp, &args.bleu_ref) {
        require_file(hyp, "BLEU hypotheses")?;
        require_file(reference, "BLEU references")?;
        let lang = args.bleu_lang.unwrap_or(Lang::En);
        let read = |p: &Path| -> anyhow::Result<Vec<Vec<String>>> {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(text.lines().map(|l| tokenize(&normalize(l), lang)).collect())
        };
        let bleu = corpus_bleu(&read(hyp)?, &read(reference)?)?;
        let json = serde_json::to_string_pretty(&json!({ "bleu": bleu, "lang": lang }))?;
        write(&env.output("bleu.json")?, &format!("{json}\n"))?;
        println!("{json}");
    }
    Ok(())
}

pub fn report(env: &Env, args: ReportArgs) -> anyhow::Result<()> {
    let format = args.format.unwrap_or(ReportFormat::Markdown);
    let bins = args.bins.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(config_error("--bins must be at least 1"));
    }
    let corpus = match &args.corpus {
        Some(p) => {
            require_file(p, "corpus")?;
            Some(ParallelCorpus::load_jsonl(p)?.stats())
        }
        None => None,
    };
    let selections = load_selections(&args.selections)?;
    let columns: Vec<ScoreColumn> = match (&args.table, args.columns.is_empty()) {
        (None, true) => Vec::new(),
        (table, all) => {
            let table = load_table(env, table.clone())?;
            if all {
                table.columns().to_vec()
            } else {
                args.columns
                    .iter()
                    .map(|c| table.column(c).cloned())
                    .collect::<Result<_, _>>()?
            }
        }
    };
    if corpus.is_none() && selections.is_empty() && columns.is_empty() {
        return Err(config_error("report needs --corpus, --selections or --table"));
    }
    let text = Report::build(corpus, &selections, &columns, bins)?.render(format);
    let output = match args.output {
        Some(p) => p,
        None => env.output(&format!("report.{}", format.extension()))?,
    };
    write(&output, &text)?;
    eprintln!("wrote {}", output.display());
    Ok(())
}
