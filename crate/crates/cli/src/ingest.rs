use std::collections::BTreeMap;

use anyhow::Context;
use mtsel_core::corpus::{ingest, IngestOptions, InputFormat};
use mtsel_core::scores::file_digest;
use mtsel_core::CorpusStats;
use serde::Serialize;

use crate::args::IngestArgs;
use crate::exit::config_error;
use crate::{require_file, Env};

#[derive(Serialize)]
struct IngestSummary {
    #[serde(flatten)]
    stats: CorpusStats,
    rejected: BTreeMap<String, usize>,
    input_digest: String,
}

pub fn run(env: &Env, args: IngestArgs) -> anyhow::Result<()> {
    let input = args.input.ok_or_else(|| config_error("ingest needs an input file"))?;
    require_file(&input, "input")?;
    let defaults = IngestOptions::default();
    let max_tokens = args.max_tokens.unwrap_or(defaults.max_tokens);
    if max_tokens == 0 {
        return Err(config_error("--max-tokens must be at least 1"));
    }
    let options = IngestOptions {
        format: args.format.unwrap_or_else(|| InputFormat::from_path(&input)),
        source_lang: args.src_lang.unwrap_or(defaults.source_lang),
        target_lang: args.tgt_lang.unwrap_or(defaults.target_lang),
        pretokenized: args.pretokenized,
        max_tokens,
        normalization: args.normalization.unwrap_or(defaults.normalization),
        ..defaults
    };
    let name = args.name.unwrap_or_else(|| "corpus".to_owned());

    let ingested = ingest(&input, &options)?;
    ingested.corpus.save_jsonl(&env.output(&format!("{name}.jsonl"))?)?;
    ingested.write_rejections(&env.output(&format!("{name}.rejections.jsonl"))?)?;

    let summary = IngestSummary {
        stats: ingested.corpus.stats(),
        rejected: ingested
            .rejection_counts()
            .into_iter()
            .map(|(reason, n)| (reason.to_string(), n))
            .collect(),
        input_digest: file_digest(&input)?,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    let stats_path = env.output(&format!("{name}.stats.json"))?;
    std::fs::write(&stats_path, format!("{json}\n")).with_context(|| format!("cannot write {}", stats_path.display()))?;
    println!("{json}");
    Ok(())
}
