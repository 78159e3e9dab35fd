//! Parallel corpus ingestion, normalization, cleaning and indexing.
//!
//! A [`ParallelCorpus`] is built once and never mutated afterwards. Pair ids
//! are dense (`0..n_docs`) in input order over the retained rows, so score
//! columns can be stored as plain vectors indexed by id.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_script::{Script, UnicodeScript};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_TOKENS: usize = 512;

pub type PairId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Source, Side::Target];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Ja,
    En,
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ja" => Ok(Lang::Ja),
            "en" => Ok(Lang::En),
            other => Err(Error::domain(format!("unsupported language `{other}`"))),
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lang::Ja => "ja",
            Lang::En => "en",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationForm {
    #[default]
    Nfc,
    /// Compatibility composition; also folds fullwidth Latin and halfwidth kana.
    Nfkc,
}

impl FromStr for NormalizationForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nfc" => Ok(NormalizationForm::Nfc),
            "nfkc" => Ok(NormalizationForm::Nfkc),
            other => Err(Error::domain(format!("unknown normalization form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tsv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(InputFormat::Tsv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(Error::domain(format!("unknown input format `{other}`"))),
        }
    }
}

impl InputFormat {
    /// Guesses the format from a file extension (`.jsonl`/`.json` vs. anything else).
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => InputFormat::Jsonl,
            _ => InputFormat::Tsv,
        }
    }
}

/// NFC-normalizes, lowercases, trims and collapses internal whitespace runs.
pub fn normalize(text: &str) -> String {
    normalize_with(text, NormalizationForm::Nfc)
}

pub fn normalize_with(text: &str, form: NormalizationForm) -> String {
    let composed: String = match form {
        NormalizationForm::Nfc => text.nfc().collect(),
        NormalizationForm::Nfkc => text.nfkc().collect(),
    };
    // Lowercasing can produce decomposed sequences (e.g. U+0130), so recompose.
    let lowered: String = match form {
        NormalizationForm::Nfc => composed.to_lowercase().nfc().collect(),
        NormalizationForm::Nfkc => composed.to_lowercase().nfkc().collect(),
    };
    let mut out = String::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    /// Han, Hiragana, Katakana and marks used with them: one token per code point.
    Cjk,
    /// Combining marks continue whatever token precedes them.
    Inherited,
    Run(Script),
}

fn char_class(c: char) -> CharClass {
    let script = c.script();
    match script {
        Script::Han | Script::Hiragana | Script::Katakana => CharClass::Cjk,
        Script::Inherited => CharClass::Inherited,
        _ => {
            let ext = c.script_extension();
            // Common characters report every script; only explicit CJK sets count.
            if !ext.contains_script(Script::Latin)
                && (ext.contains_script(Script::Hiragana)
                    || ext.contains_script(Script::Katakana)
                    || ext.contains_script(Script::Han))
            {
                CharClass::Cjk
            } else {
                CharClass::Run(script)
            }
        }
    }
}

/// Tokenizes normalized text.
///
/// English splits on whitespace. Japanese splits on whitespace and then into
/// runs of a single script, with Han/Hiragana/Katakana split per code point.
/// Digits and other Common characters join the neighbouring non-CJK run.
pub fn tokenize(text: &str, lang: Lang) -> Vec<String> {
    match lang {
        Lang::En => text.split_whitespace().map(str::to_owned).collect(),
        Lang::Ja => text.split_whitespace().flat_map(script_runs).collect(),
    }
}

fn script_runs(chunk: &str) -> Vec<String> {
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut current_class: Option<CharClass> = None;
    for c in chunk.chars() {
        let class = char_class(c);
        match class {
            CharClass::Inherited if !current.is_empty() => current.push(c),
            CharClass::Cjk => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                current.push(c);
                current_class = Some(CharClass::Cjk);
            }
            _ => {
                // Common characters (digits, punctuation) take the script of their run
                let joined = match (current_class, class) {
                    (Some(CharClass::Run(a)), CharClass::Run(b)) if a == b || b == Script::Common => Some(a),
                    (Some(CharClass::Run(Script::Common)), CharClass::Run(b)) => Some(b),
                    _ => None,
                };
                match joined {
                    Some(script) => current_class = Some(CharClass::Run(script)),
                    None => {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        current_class = Some(class);
                    }
                }
                current.push(c);
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: PairId,
    /// 1-based line in the ingested file.
    pub line: usize,
    /// The optional `"id"` field of JSONL input, kept verbatim as a string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(rename = "src")]
    pub source_text: String,
    #[serde(rename = "tgt")]
    pub target_text: String,
    #[serde(rename = "src_tokens")]
    pub source_tokens: Vec<String>,
    #[serde(rename = "tgt_tokens")]
    pub target_tokens: Vec<String>,
}

impl SentencePair {
    pub fn tokens(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.source_tokens,
            Side::Target => &self.target_tokens,
        }
    }

    pub fn text(&self, side: Side) -> &str {
        match side {
            Side::Source => &self.source_text,
            Side::Target => &self.target_text,
        }
    }
}

/// Vocabulary and document frequencies for one side of the corpus.
///
/// Token ids follow first appearance in corpus order.
#[derive(Debug, Clone, Default)]
pub struct SideIndex {
    vocab: IndexSet<String>,
    doc_freq: Vec<u32>,
    pair_token_ids: Vec<Vec<u32>>,
}

impl SideIndex {
    fn build<'a>(sides: impl Iterator<Item = &'a [String]>) -> Self {
        let mut index = SideIndex::default();
        let mut seen: HashSet<u32> = HashSet::new();
        for tokens in sides {
            seen.clear();
            let mut ids = Vec::with_capacity(tokens.len());
            for tok in tokens {
                let (id, inserted) = index.vocab.insert_full(tok.clone());
                if inserted {
                    index.doc_freq.push(0);
                }
                let id = id as u32;
                if seen.insert(id) {
                    index.doc_freq[id as usize] += 1;
                }
                ids.push(id);
            }
            index.pair_token_ids.push(ids);
        }
        index
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get_index_of(token).map(|i| i as u32)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get_index(id as usize).map(String::as_str)
    }

    /// Number of pairs whose side contains `token`; `None` when out of vocabulary.
    pub fn doc_freq(&self, token: &str) -> Option<u32> {
        self.token_id(token).map(|id| self.doc_freq[id as usize])
    }

    pub fn doc_freq_by_id(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn pair_token_ids(&self, id: PairId) -> &[u32] {
        &self.pair_token_ids[id]
    }

    /// Total token occurrences on this side.
    pub fn token_count(&self) -> usize {
        self.pair_token_ids.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    source: SideIndex,
    target: SideIndex,
}

impl ParallelCorpus {
    /// Builds a corpus from already-cleaned pairs, checking the corpus invariants.
    pub fn from_pairs(pairs: Vec<SentencePair>) -> Result<Self> {
        let mut keys: HashSet<(&str, &str)> = HashSet::with_capacity(pairs.len());
        for (expected, pair) in pairs.iter().enumerate() {
            if pair.id != expected {
                return Err(Error::domain(format!(
                    "pair ids must be dense and ordered: found {} at position {expected}",
                    pair.id
                )));
            }
            if pair.source_text.is_empty() || pair.target_text.is_empty() {
                return Err(Error::domain(format!("pair {} has an empty side", pair.id)));
            }
            if !keys.insert((&pair.source_text, &pair.target_text)) {
                return Err(Error::domain(format!("pair {} is a duplicate", pair.id)));
            }
        }
        let source = SideIndex::build(pairs.iter().map(|p| p.source_tokens.as_slice()));
        let target = SideIndex::build(pairs.iter().map(|p| p.target_tokens.as_slice()));
        Ok(ParallelCorpus {
            pairs,
            source,
            target,
        })
    }

    /// Convenience constructor from whitespace-tokenized text pairs; ids follow input order.
    pub fn from_texts<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let pairs = pairs
            .iter()
            .enumerate()
            .map(|(id, (src, tgt))| {
                let source_tokens = tokenize(src.as_ref(), Lang::En);
                let target_tokens = tokenize(tgt.as_ref(), Lang::En);
                SentencePair {
                    id,
                    line: id + 1,
                    origin: None,
                    source_text: source_tokens.join(" "),
                    target_text: target_tokens.join(" "),
                    source_tokens,
                    target_tokens,
                }
            })
            .collect();
        Self::from_pairs(pairs)
    }

    pub fn empty() -> Self {
        ParallelCorpus {
            pairs: Vec::new(),
            source: SideIndex::default(),
            target: SideIndex::default(),
        }
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn pair(&self, id: PairId) -> Option<&SentencePair> {
        self.pairs.get(id)
    }

    pub fn n_docs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn side(&self, side: Side) -> &SideIndex {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    pub fn stats(&self) -> CorpusStats {
        corpus_stats(self)
    }

    /// Writes the corpus as JSONL, one [`SentencePair`] per line.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for pair in &self.pairs {
            serde_json::to_writer(&mut out, pair)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let pair: SentencePair = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                row: i + 1,
                reason: e.to_string(),
            })?;
            pairs.push(pair);
        }
        Self::from_pairs(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pair_count: usize,
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
}

pub fn corpus_stats(corpus: &ParallelCorpus) -> CorpusStats {
    CorpusStats {
        pair_count: corpus.n_docs(),
        source_vocab_size: corpus.source.vocab_size(),
        target_vocab_size: corpus.target.vocab_size(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed,
    EmptySource,
    EmptyTarget,
    ExcessiveRepetition,
    Filtered,
    Duplicate,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::Malformed => "malformed",
            RejectReason::EmptySource => "empty_source",
            RejectReason::EmptyTarget => "empty_target",
            RejectReason::ExcessiveRepetition => "excessive_repetition",
            RejectReason::Filtered => "filtered",
            RejectReason::Duplicate => "duplicate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: RejectReason,
}

/// A side is rejected when it has at least `min_tokens` tokens and one token
/// accounts for more than `max_share` of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRule {
    pub min_tokens: usize,
    pub max_share: f64,
}

impl Default for RepetitionRule {
    fn default() -> Self {
        RepetitionRule {
            min_tokens: 10,
            max_share: 0.5,
        }
    }
}

impl RepetitionRule {
    pub fn is_excessive(&self, tokens: &[String]) -> bool {
        if tokens.len() < self.min_tokens {
            return false;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut top = 0;
        for t in tokens {
            let c = counts.entry(t.as_str()).or_default();
            *c += 1;
            top = top.max(*c);
        }
        top as f64 > self.max_share * tokens.len() as f64
    }
}

/// Extra cleaning hook: return `true` to reject a (normalized) pair.
pub type PairFilter = Arc<dyn Fn(&str, &str) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct IngestOptions {
    pub format: InputFormat,
    pub source_lang: Lang,
    pub target_lang: Lang,
    /// Input is already tokenized: tokens are taken verbatim as whitespace-separated fields.
    pub pretokenized: bool,
    pub max_tokens: usize,
    pub normalization: NormalizationForm,
    pub repetition: RepetitionRule,
    pub filter: Option<PairFilter>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            format: InputFormat::Tsv,
            source_lang: Lang::Ja,
            target_lang: Lang::En,
            pretokenized: false,
            max_tokens: DEFAULT_MAX_TOKENS,
            normalization: NormalizationForm::Nfc,
            repetition: RepetitionRule::default(),
            filter: None,
        }
    }
}

impl fmt::Debug for IngestOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IngestOptions")
            .field("format", &self.format)
            .field("source_lang", &self.source_lang)
            .field("target_lang", &self.target_lang)
            .field("pretokenized", &self.pretokenized)
            .field("max_tokens", &self.max_tokens)
            .field("normalization", &self.normalization)
            .field("repetition", &self.repetition)
            .field("filter", &self.filter.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl IngestOptions {
    pub fn with_format(mut self, format: InputFormat) -> Self {
        self.format = format;
        self
    }

    fn prepare_side(&self, raw: &str, lang: Lang) -> (String, Vec<String>) {
        let text = normalize_with(raw, self.normalization);
        let mut tokens = if self.pretokenized {
            tokenize(&text, Lang::En)
        } else {
            tokenize(&text, lang)
        };
        if tokens.len() > self.max_tokens {
            tokens.truncate(self.max_tokens);
            return (tokens.join(" "), tokens);
        }
        (text, tokens)
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: ParallelCorpus,
    pub rejections: Vec<Rejection>,
}

impl Ingested {
    pub fn rejection_counts(&self) -> Vec<(RejectReason, usize)> {
        let mut counts: Vec<(RejectReason, usize)> = Vec::new();
        for r in &self.rejections {
            match counts.iter_mut().find(|(reason, _)| *reason == r.reason) {
                Some((_, n)) => *n += 1,
                None => counts.push((r.reason, 1)),
            }
        }
        counts
    }

    pub fn write_rejections(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.rejections {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct JsonlRow {
    src: String,
    tgt: String,
    #[serde(default)]
    id: Option<serde_json::Value>,
}

fn parse_row(line: &str, format: InputFormat) -> Option<(String, String, Option<String>)> {
    match format {
        InputFormat::Tsv => {
            let mut cols = line.split('\t');
            let src = cols.next()?;
            let tgt = cols.next()?;
            if cols.next().is_some() {
                return None;
            }
            Some((src.to_owned(), tgt.to_owned(), None))
        }
        InputFormat::Jsonl => {
            let row: JsonlRow = serde_json::from_str(line).ok()?;
            let origin = row.id.map(|v| match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            });
            Some((row.src, row.tgt, origin))
        }
    }
}

/// Reads and cleans a parallel corpus file.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), options)
}

pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested> {
    let mut reader = BufReader::new(reader);
    let mut pairs: Vec<SentencePair> = Vec::new();
    let mut rejections = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let mut reject = |reason| {
            rejections.push(Rejection {
                line: line_no,
                reason,
            })
        };
        let Ok(line) = std::str::from_utf8(&buf) else {
            reject(RejectReason::Malformed);
            continue;
        };
        let Some((raw_src, raw_tgt, origin)) = parse_row(line, options.format) else {
            reject(RejectReason::Malformed);
            continue;
        };
        let (source_text, source_tokens) = options.prepare_side(&raw_src, options.source_lang);
        let (target_text, target_tokens) = options.prepare_side(&raw_tgt, options.target_lang);
        if source_tokens.is_empty() {
            reject(RejectReason::EmptySource);
            continue;
        }
        if target_tokens.is_empty() {
            reject(RejectReason::EmptyTarget);
            continue;
        }
        if options.repetition.is_excessive(&source_tokens)
            || options.repetition.is_excessive(&target_tokens)
        {
            reject(RejectReason::ExcessiveRepetition);
            continue;
        }
        if let Some(filter) = &options.filter {
            if filter(&source_text, &target_text) {
                reject(RejectReason::Filtered);
                continue;
            }
        }
        if !seen.insert((source_text.clone(), target_text.clone())) {
            reject(RejectReason::Duplicate);
            continue;
        }
        pairs.push(SentencePair {
            id: pairs.len(),
            line: line_no,
            origin,
            source_text,
            target_text,
            source_tokens,
            target_tokens,
        });
    }
    Ok(Ingested {
        corpus: ParallelCorpus::from_pairs(pairs)?,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest_str(data: &str, options: &IngestOptions) -> Ingested {
        ingest_reader(data.as_bytes(), options).unwrap()
    }

    #[test]
    fn normalize_composes_and_folds_case() {
        // fullwidth C, then e + combining acute
        let input = "\u{FF23}afe\u{0301}";
        assert_eq!(normalize(input), "\u{FF43}af\u{e9}");
        assert_eq!(normalize_with(input, NormalizationForm::Nfkc), "caf\u{e9}");
    }

    #[test]
    fn normalize_whitespace_and_case() {
        assert_eq!(normalize("  Hello   World  "), "hello world");
        assert_eq!(normalize("ABC"), "abc");
        assert_eq!(normalize("a\t\u{3000}b\n"), "a b");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("hello world", Lang::En), vec!["hello", "world"]);
        assert_eq!(tokenize("猫がいる", Lang::Ja), vec!["猫", "が", "い", "る"]);
        assert!(tokenize("", Lang::Ja).is_empty());
        assert!(tokenize("", Lang::En).is_empty());
    }

    #[test]
    fn tokenize_ja_keeps_latin_and_digit_runs() {
        assert_eq!(
            tokenize("kyotoは2024年", Lang::Ja),
            vec!["kyoto", "は", "2024", "年"]
        );
        assert_eq!(tokenize("iphone15を", Lang::Ja), vec!["iphone15", "を"]);
        assert_eq!(tokenize("3dプリンタ", Lang::Ja), vec!["3d", "プ", "リ", "ン", "タ"]);
        assert_eq!(tokenize("コーヒー。", Lang::Ja), vec!["コ", "ー", "ヒ", "ー", "。"]);
        // dakuten as a combining mark stays with its base
        assert_eq!(tokenize("か\u{3099}", Lang::Ja), vec!["か\u{3099}"]);
    }

    #[test]
    fn ingest_drops_empty_and_duplicates() {
        let out = ingest_str("猫\tcat\n\tdog\n猫\tcat\n", &IngestOptions::default());
        assert_eq!(out.corpus.n_docs(), 1);
        assert_eq!(
            out.rejections,
            vec![
                Rejection { line: 2, reason: RejectReason::EmptySource },
                Rejection { line: 3, reason: RejectReason::Duplicate },
            ]
        );
    }

    #[test]
    fn ingest_counts_malformed_rows() {
        let out = ingest_str("a\tb\tc\nonly\nx\ty\n\n", &IngestOptions::default());
        assert_eq!(out.corpus.n_docs(), 1);
        assert_eq!(out.corpus.pairs()[0].line, 3);
        assert_eq!(out.rejection_counts(), vec![(RejectReason::Malformed, 3)]);
    }

    #[test]
    fn ingest_jsonl_keeps_origin_ids() {
        let opts = IngestOptions::default().with_format(InputFormat::Jsonl);
        let data = "{\"src\":\"A\",\"tgt\":\"B\",\"id\":17,\"extra\":1}\n{\"src\":\"c\"}\n{\"src\":\"d\",\"tgt\":\"e\",\"id\":\"x\"}\n";
        let out = ingest_str(data, &opts);
        assert_eq!(out.corpus.n_docs(), 2);
        assert_eq!(out.corpus.pairs()[0].origin.as_deref(), Some("17"));
        assert_eq!(out.corpus.pairs()[1].origin.as_deref(), Some("x"));
        assert_eq!(out.corpus.pairs()[1].id, 1);
        assert_eq!(out.rejections.len(), 1);
    }

    #[test]
    fn dedup_key_is_the_pair() {
        let out = ingest_str("猫\tcat\n猫\tthe cat\nネコ\tcat\n", &IngestOptions::default());
        assert_eq!(out.corpus.n_docs(), 3);
    }

    #[test]
    fn duplicates_detected_after_normalization() {
        let out = ingest_str("Hello  World\tX\nhello world\tx\n", &IngestOptions {
            source_lang: Lang::En,
            ..IngestOptions::default()
        });
        assert_eq!(out.corpus.n_docs(), 1);
    }

    #[test]
    fn truncation_rejoins_retained_tokens() {
        let opts = IngestOptions {
            max_tokens: 3,
            ..IngestOptions::default()
        };
        let out = ingest_str("猫がいるよ\ta b c d e\n", &opts);
        let pair = &out.corpus.pairs()[0];
        assert_eq!(pair.source_tokens, vec!["猫", "が", "い"]);
        assert_eq!(pair.source_text, "猫 が い");
        assert_eq!(pair.target_text, "a b c");
        assert_eq!(tokenize(&pair.source_text, Lang::Ja), pair.source_tokens);
    }

    #[test]
    fn repetition_rule() {
        let rule = RepetitionRule::default();
        let toks = |s: &str| tokenize(s, Lang::En);
        assert!(rule.is_excessive(&toks("a a a a a a b c d e")));
        // exactly half is not more than half
        assert!(!rule.is_excessive(&toks("a a a a a b c d e f")));
        // too short to judge
        assert!(!rule.is_excessive(&toks("a a a a a a a a a")));
        let out = ingest_str("x\tha ha ha ha ha ha ha ha ha ha\n", &IngestOptions::default());
        assert_eq!(out.rejections[0].reason, RejectReason::ExcessiveRepetition);
    }

    #[test]
    fn filter_hook_rejections_are_counted() {
        let opts = IngestOptions {
            filter: Some(Arc::new(|src: &str, _tgt: &str| src.contains('<'))),
            ..IngestOptions::default()
        };
        let out = ingest_str("<b>\tbold\nok\tfine\n", &opts);
        assert_eq!(out.corpus.n_docs(), 1);
        assert_eq!(out.rejections[0].reason, RejectReason::Filtered);
    }

    #[test]
    fn pretokenized_input_is_taken_verbatim() {
        let opts = IngestOptions {
            pretokenized: true,
            ..IngestOptions::default()
        };
        let out = ingest_str("猫 が いる\tthe cat\n", &opts);
        assert_eq!(out.corpus.pairs()[0].source_tokens, vec!["猫", "が", "いる"]);
    }

    #[test]
    fn stats_examples() {
        let c = ParallelCorpus::from_texts(&[("a b", "x"), ("b c", "x y")]).unwrap();
        assert_eq!(
            c.stats(),
            CorpusStats { pair_count: 2, source_vocab_size: 3, target_vocab_size: 2 }
        );
        assert_eq!(
            ParallelCorpus::empty().stats(),
            CorpusStats { pair_count: 0, source_vocab_size: 0, target_vocab_size: 0 }
        );
        let one = ParallelCorpus::from_texts(&[("a", "b")]).unwrap();
        assert_eq!(
            one.stats(),
            CorpusStats { pair_count: 1, source_vocab_size: 1, target_vocab_size: 1 }
        );
    }

    #[test]
    fn doc_freq_counts_pairs_not_occurrences() {
        let c = ParallelCorpus::from_texts(&[("a a b", "x"), ("a", "y")]).unwrap();
        let src = c.side(Side::Source);
        assert_eq!(src.doc_freq("a"), Some(2));
        assert_eq!(src.doc_freq("b"), Some(1));
        assert_eq!(src.doc_freq("zzz"), None);
        assert_eq!(src.token_id("b"), Some(1));
    }

    #[test]
    fn from_pairs_rejects_broken_invariants() {
        let mut pairs = ParallelCorpus::from_texts(&[("a", "b"), ("c", "d")])
            .unwrap()
            .pairs()
            .to_vec();
        pairs[1].source_text = "a".into();
        pairs[1].target_text = "b".into();
        assert!(ParallelCorpus::from_pairs(pairs.clone()).is_err());
        pairs[1].id = 5;
        assert!(ParallelCorpus::from_pairs(pairs).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = ingest_str("猫がいる\tThe cat\n犬\tdog\n", &IngestOptions::default());
        let path = dir.path().join("corpus.jsonl");
        out.corpus.save_jsonl(&path).unwrap();
        let back = ParallelCorpus::load_jsonl(&path).unwrap();
        assert_eq!(back.pairs(), out.corpus.pairs());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = ingest(Path::new("/nonexistent/corpus.tsv"), &IngestOptions::default());
        assert!(matches!(err, Err(Error::Io { .. })));
    }
}
