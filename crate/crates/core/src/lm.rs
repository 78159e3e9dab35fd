//! Add-alpha smoothed n-gram language models and cross-entropy-difference
//! (Moore-Lewis) domain scoring.
//!
//! Every sequence is padded with `order - 1` begin markers. Probabilities are
//! `(count + alpha) / (context_total + alpha * (V + 1))` over the `V` training
//! word types plus one shared unknown type, so each context's distribution
//! sums to one. Cross-entropies are in nats per token.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexSet;
use rayon::prelude::*;

use crate::corpus::{ParallelCorpus, SentencePair, Side};
use crate::error::{Error, Result};
use crate::lexical::SideSelector;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;

const UNK: u32 = 0;
const BOS: u32 = 1;
const FIRST_WORD: u32 = 2;

const DUMP_MAGIC: &str = "ngram-lm";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    alpha: f64,
    vocab: IndexSet<String>,
    /// Keyed by context ids followed by the predicted id.
    counts: HashMap<Vec<u32>, u32>,
    context_totals: HashMap<Vec<u32>, u32>,
}

fn check_params(order: usize, alpha: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::domain("n-gram order must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("smoothing alpha must be positive, got {alpha}")));
    }
    Ok(())
}

impl NGramLM {
    pub fn train<S: AsRef<[String]>>(sequences: &[S], order: usize, alpha: f64) -> Result<Self> {
        check_params(order, alpha)?;
        if !sequences.iter().any(|s| !s.as_ref().is_empty()) {
            return Err(Error::domain("language model needs at least one non-empty sequence"));
        }
        let mut lm = NGramLM {
            order,
            alpha,
            vocab: IndexSet::new(),
            counts: HashMap::new(),
            context_totals: HashMap::new(),
        };
        for seq in sequences {
            for tok in seq.as_ref() {
                if !lm.vocab.contains(tok) {
                    lm.vocab.insert(tok.clone());
                }
            }
        }
        for seq in sequences {
            let seq = seq.as_ref();
            if seq.is_empty() {
                continue;
            }
            let padded = lm.pad(seq);
            for window in padded.windows(order) {
                *lm.counts.entry(window.to_vec()).or_default() += 1;
                *lm.context_totals.entry(window[..order - 1].to_vec()).or_default() += 1;
            }
        }
        Ok(lm)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of word types seen in training (excluding the unknown type).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn word_id(&self, token: &str) -> u32 {
        self.vocab
            .get_index_of(token)
            .map_or(UNK, |i| i as u32 + FIRST_WORD)
    }

    fn pad(&self, tokens: &[String]) -> Vec<u32> {
        let mut padded = vec![BOS; self.order - 1];
        padded.extend(tokens.iter().map(|t| self.word_id(t)));
        padded
    }

    fn prob_ids(&self, context: &[u32], word: u32) -> f64 {
        let mut key = Vec::with_capacity(context.len() + 1);
        key.extend_from_slice(context);
        key.push(word);
        let count = self.counts.get(&key).copied().unwrap_or(0) as f64;
        let total = self.context_totals.get(context).copied().unwrap_or(0) as f64;
        (count + self.alpha) / (total + self.alpha * (self.vocab.len() as f64 + 1.0))
    }

    /// `P(word | context)`; only the last `order - 1` context tokens are used and
    /// a short context is left-padded with begin markers.
    pub fn prob(&self, context: &[String], word: &str) -> f64 {
        let n = self.order - 1;
        let mut ctx = vec![BOS; n.saturating_sub(context.len())];
        let skip = context.len().saturating_sub(n);
        ctx.extend(context[skip..].iter().map(|t| self.word_id(t)));
        self.prob_ids(&ctx, self.word_id(word))
    }

    /// Probability of the unknown type in `context`.
    pub fn unk_prob(&self, context: &[String]) -> f64 {
        let n = self.order - 1;
        let mut ctx = vec![BOS; n.saturating_sub(context.len())];
        let skip = context.len().saturating_sub(n);
        ctx.extend(context[skip..].iter().map(|t| self.word_id(t)));
        self.prob_ids(&ctx, UNK)
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str)
    }

    /// Contexts observed in training, as token strings (`<s>` for begin markers).
    pub fn observed_contexts(&self) -> Vec<Vec<String>> {
        let mut ctxs: Vec<&Vec<u32>> = self.context_totals.keys().collect();
        ctxs.sort();
        ctxs.into_iter()
            .map(|c| {
                c.iter()
                    .map(|&id| match id {
                        BOS => "<s>".to_owned(),
                        UNK => "<unk>".to_owned(),
                        w => self.vocab[(w - FIRST_WORD) as usize].clone(),
                    })
                    .collect()
            })
            .collect()
    }

    /// Sum of natural-log probabilities of every token in `tokens`.
    pub fn log_prob(&self, tokens: &[String]) -> f64 {
        let padded = self.pad(tokens);
        padded
            .windows(self.order)
            .map(|w| self.prob_ids(&w[..self.order - 1], w[self.order - 1]).ln())
            .sum()
    }

    /// Per-token cross-entropy in nats.
    pub fn cross_entropy(&self, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::domain("cross-entropy of an empty sequence"));
        }
        Ok(-self.log_prob(tokens) / tokens.len() as f64)
    }

    /// Writes the text count dump:
    ///
    /// ```text
    /// ngram-lm 1
    /// order <n>
    /// alpha <f64, shortest round-trip exponent form>
    /// vocab <V>
    /// <V lines: word types in id order; word i has id i + 2>
    /// ngrams <M>
    /// <M lines: space-separated ids (context then word), a tab, the count>
    /// ```
    ///
    /// Id 0 is the unknown type and id 1 the begin marker. N-gram lines are
    /// sorted by id sequence.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_dump(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_dump<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{DUMP_MAGIC} {DUMP_VERSION}")?;
        writeln!(out, "order {}", self.order)?;
        writeln!(out, "alpha {:e}", self.alpha)?;
        writeln!(out, "vocab {}", self.vocab.len())?;
        for tok in &self.vocab {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::domain(format!("token {tok:?} cannot be written to a dump")));
            }
            writeln!(out, "{tok}")?;
        }
        let mut ngrams: Vec<(&Vec<u32>, &u32)> = self.counts.iter().collect();
        ngrams.sort();
        writeln!(out, "ngrams {}", ngrams.len())?;
        for (ids, count) in ngrams {
            let ids: Vec<String> = ids.iter().map(u32::to_string).collect();
            writeln!(out, "{}\t{count}", ids.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_dump(BufReader::new(file))
    }

    pub fn read_dump<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(Error::Malformed {
                    row: 0,
                    reason: format!("dump ends before {what}"),
                }),
            }
        };
        let bad = |row: usize, reason: &str| Error::Malformed {
            row,
            reason: reason.to_owned(),
        };
        let field = |row: usize, line: &str, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(row, &format!("expected `{key} <value>`")))
        };

        let (row, header) = next("header")?;
        if header != format!("{DUMP_MAGIC} {DUMP_VERSION}") {
            return Err(bad(row, "not an ngram-lm v1 dump"));
        }
        let (row, line) = next("order")?;
        let order: usize = field(row, &line, "order")?.parse().map_err(|_| bad(row, "bad order"))?;
        let (row, line) = next("alpha")?;
        let alpha: f64 = field(row, &line, "alpha")?.parse().map_err(|_| bad(row, "bad alpha"))?;
        check_params(order, alpha)?;
        let (row, line) = next("vocab")?;
        let v: usize = field(row, &line, "vocab")?.parse().map_err(|_| bad(row, "bad vocab size"))?;
        let mut vocab = IndexSet::with_capacity(v);
        for _ in 0..v {
            let (row, tok) = next("vocabulary entry")?;
            if !vocab.insert(tok) {
                return Err(bad(row, "duplicate vocabulary entry"));
            }
        }
        let (row, line) = next("ngrams")?;
        let m: usize = field(row, &line, "ngrams")?.parse().map_err(|_| bad(row, "bad n-gram count"))?;
        let max_id = v as u32 + FIRST_WORD;
        let mut counts = HashMap::with_capacity(m);
        let mut context_totals: HashMap<Vec<u32>, u32> = HashMap::new();
        for _ in 0..m {
            let (row, line) = next("n-gram entry")?;
            let (ids, count) = line.split_once('\t').ok_or_else(|| bad(row, "missing tab"))?;
            let ids: Vec<u32> = ids
                .split(' ')
                .map(|s| s.parse::<u32>().ok().filter(|&id| id < max_id))
                .collect::<Option<_>>()
                .ok_or_else(|| bad(row, "bad n-gram id"))?;
            let count: u32 = count.parse().map_err(|_| bad(row, "bad count"))?;
            if ids.len() != order {
                return Err(bad(row, "n-gram length does not match order"));
            }
            *context_totals.entry(ids[..order - 1].to_vec()).or_default() += count;
            if counts.insert(ids, count).is_some() {
                return Err(bad(row, "duplicate n-gram"));
            }
        }
        Ok(NGramLM {
            order,
            alpha,
            vocab,
            counts,
            context_totals,
        })
    }
}

/// `H_out(x) - H_in(x)`; positive when `x` looks more in-domain.
pub fn moore_lewis(tokens: &[String], lm_in: &NGramLM, lm_out: &NGramLM) -> Result<f64> {
    if lm_in.order() != lm_out.order() {
        return Err(Error::domain(format!(
            "in-domain and out-of-domain models differ in order ({} vs {})",
            lm_in.order(),
            lm_out.order()
        )));
    }
    Ok(lm_out.cross_entropy(tokens)? - lm_in.cross_entropy(tokens)?)
}

/// One language model per side of a parallel corpus.
#[derive(Debug, Clone)]
pub struct SideModels {
    pub source: NGramLM,
    pub target: NGramLM,
}

impl SideModels {
    pub fn train(corpus: &ParallelCorpus, order: usize, alpha: f64) -> Result<Self> {
        let side = |s: Side| -> Vec<&[String]> {
            corpus.pairs().iter().map(|p| p.tokens(s)).collect()
        };
        Ok(SideModels {
            source: NGramLM::train(&side(Side::Source), order, alpha)?,
            target: NGramLM::train(&side(Side::Target), order, alpha)?,
        })
    }

    pub fn get(&self, side: Side) -> &NGramLM {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }
}

/// Bilingual cross-entropy difference: the sum of the per-side differences.
pub fn bilingual_delta(pair: &SentencePair, lms_in: &SideModels, lms_out: &SideModels) -> Result<f64> {
    let src = moore_lewis(&pair.source_tokens, &lms_in.source, &lms_out.source)?;
    let tgt = moore_lewis(&pair.target_tokens, &lms_in.target, &lms_out.target)?;
    Ok(src + tgt)
}

/// Scores every pair; `Both` sums the two side differences.
pub fn score_moore_lewis(
    corpus: &ParallelCorpus,
    lms_in: &SideModels,
    lms_out: &SideModels,
    selector: SideSelector,
) -> Result<Vec<f64>> {
    corpus
        .pairs()
        .par_iter()
        .map(|pair| match selector {
            SideSelector::Both => bilingual_delta(pair, lms_in, lms_out),
            SideSelector::Source => moore_lewis(&pair.source_tokens, &lms_in.source, &lms_out.source),
            SideSelector::Target => moore_lewis(&pair.target_tokens, &lms_in.target, &lms_out.target),
        })
        .collect()
}
