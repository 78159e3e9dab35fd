use mtsel_core::selection::{random_sample, select, DEFAULT_SEED};
use mtsel_core::{ParallelCorpus, ScoreTable};

use crate::args::SelectArgs;
use crate::exit::config_error;
use crate::{require_file, Env};

pub fn run(env: &Env, args: SelectArgs) -> anyhow::Result<()> {
    let method = args.method.ok_or_else(|| config_error("select needs --method"))?;
    let k = args.k.ok_or_else(|| config_error("select needs --k"))?;

    let result = if method == "random" {
        let n_docs = match (args.n_docs, &args.corpus, &args.table) {
            (Some(n), _, _) => n,
            (None, Some(corpus), _) => {
                require_file(corpus, "corpus")?;
                ParallelCorpus::load_jsonl(corpus)?.n_docs()
            }
            (None, None, table) => {
                let table = env.default_path(table.clone(), "scores.csv");
                require_file(&table, "score table")?;
                ScoreTable::load(&table)?.n_docs()
            }
        };
        random_sample(n_docs, k, args.seed.unwrap_or(DEFAULT_SEED), args.emit_ranking)?
    } else {
        if args.seed.is_some() {
            return Err(config_error("--seed only applies to --method random"));
        }
        let table_path = env.default_path(args.table, "scores.csv");
        require_file(&table_path, "score table")?;
        let table = ScoreTable::load(&table_path)?;
        select(table.column(&method)?, table.n_docs(), k, args.emit_ranking)?
    };

    let output = match args.output {
        Some(path) => path,
        None => env.output(&format!("select_{method}.jsonl"))?,
    };
    result.save(&output)?;
    if args.emit_ranking {
        let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        result.save_ranking(&output.with_file_name(format!("{stem}.ranking.txt")))?;
    }
    eprintln!("selected {} of k={k} by {method}", result.selected.len());
    Ok(())
}
