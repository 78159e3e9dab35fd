//! TF-IDF and IDF-based sentence scoring.
//!
//! Each side of each pair is one document; document frequencies are kept per
//! side. Logarithms are natural. Out-of-vocabulary tokens are treated as if
//! they occurred in exactly one document.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PairId, ParallelCorpus, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSelector {
    Source,
    Target,
    #[default]
    Both,
}

impl SideSelector {
    pub fn sides(self) -> &'static [Side] {
        match self {
            SideSelector::Source => &[Side::Source],
            SideSelector::Target => &[Side::Target],
            SideSelector::Both => &Side::BOTH,
        }
    }
}

impl FromStr for SideSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" | "src" => Ok(SideSelector::Source),
            "target" | "tgt" => Ok(SideSelector::Target),
            "both" => Ok(SideSelector::Both),
            other => Err(Error::domain(format!("unknown side `{other}`"))),
        }
    }
}

impl fmt::Display for SideSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SideSelector::Source => "source",
            SideSelector::Target => "target",
            SideSelector::Both => "both",
        })
    }
}

fn idf_value(n_docs: usize, doc_freq: u32) -> f64 {
    (n_docs as f64 / doc_freq.max(1) as f64).ln().max(0.0)
}

/// `ln(N / n_w)` for `token` on one side of the corpus.
pub fn idf(token: &str, side: Side, corpus: &ParallelCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::domain("idf over an empty corpus"));
    }
    let df = corpus.side(side).doc_freq(token).unwrap_or(1);
    Ok(idf_value(corpus.n_docs(), df))
}

/// Raw term frequency of `token` in `tokens` times its idf.
pub fn tfidf(token: &str, tokens: &[String], side: Side, corpus: &ParallelCorpus) -> Result<f64> {
    let idf = idf(token, side, corpus)?;
    let tf = tokens.iter().filter(|t| *t == token).count();
    Ok(tf as f64 * idf)
}

/// Mean tfidf over token occurrences of an arbitrary token sequence.
pub fn mean_tfidf_tokens(tokens: &[String], side: Side, corpus: &ParallelCorpus) -> Result<f64> {
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in tokens {
        *tf.entry(t).or_default() += 1;
    }
    let mut sum = 0.0;
    for t in tokens {
        sum += tf[t.as_str()] as f64 * idf(t, side, corpus)?;
    }
    Ok(sum / tokens.len() as f64)
}

pub fn avg_idf_tokens(tokens: &[String], side: Side, corpus: &ParallelCorpus) -> Result<f64> {
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for t in tokens {
        sum += idf(t, side, corpus)?;
    }
    Ok(sum / tokens.len() as f64)
}

/// Precomputed per-side idf tables for scoring every pair of a corpus.
#[derive(Debug, Clone)]
pub struct IdfTable {
    source: Vec<f64>,
    target: Vec<f64>,
}

impl IdfTable {
    pub fn new(corpus: &ParallelCorpus) -> Self {
        let build = |side| {
            let index = corpus.side(side);
            (0..index.vocab_size() as u32)
                .map(|id| idf_value(corpus.n_docs(), index.doc_freq_by_id(id)))
                .collect()
        };
        IdfTable {
            source: build(Side::Source),
            target: build(Side::Target),
        }
    }

    pub fn get(&self, side: Side, token_id: u32) -> f64 {
        match side {
            Side::Source => self.source[token_id as usize],
            Side::Target => self.target[token_id as usize],
        }
    }

    /// Dimension of the vector space for `selector`; target ids follow source ids in `Both`.
    pub fn dim(&self, selector: SideSelector) -> usize {
        match selector {
            SideSelector::Source => self.source.len(),
            SideSelector::Target => self.target.len(),
            SideSelector::Both => self.source.len() + self.target.len(),
        }
    }

    fn offset(&self, selector: SideSelector, side: Side) -> u32 {
        match (selector, side) {
            (SideSelector::Both, Side::Target) => self.source.len() as u32,
            _ => 0,
        }
    }
}

/// Term frequencies of a token-id sequence, in order of first occurrence.
fn term_counts(ids: &[u32]) -> Vec<(u32, u32)> {
    let mut counts: Vec<(u32, u32)> = Vec::new();
    let mut pos: HashMap<u32, usize> = HashMap::with_capacity(ids.len());
    for &id in ids {
        match pos.get(&id) {
            Some(&i) => counts[i].1 += 1,
            None => {
                pos.insert(id, counts.len());
                counts.push((id, 1));
            }
        }
    }
    counts
}

fn side_mean_tfidf(corpus: &ParallelCorpus, table: &IdfTable, id: PairId, side: Side) -> f64 {
    let ids = corpus.side(side).pair_token_ids(id);
    if ids.is_empty() {
        return 0.0;
    }
    let sum: f64 = term_counts(ids)
        .into_iter()
        .map(|(tok, tf)| (tf as f64) * (tf as f64) * table.get(side, tok))
        .sum();
    sum / ids.len() as f64
}

fn side_avg_idf(corpus: &ParallelCorpus, table: &IdfTable, id: PairId, side: Side) -> f64 {
    let ids = corpus.side(side).pair_token_ids(id);
    if ids.is_empty() {
        return 0.0;
    }
    ids.iter().map(|&t| table.get(side, t)).sum::<f64>() / ids.len() as f64
}

fn combine(selector: SideSelector, mut per_side: impl FnMut(Side) -> f64) -> f64 {
    match selector {
        SideSelector::Source => per_side(Side::Source),
        SideSelector::Target => per_side(Side::Target),
        SideSelector::Both => (per_side(Side::Source) + per_side(Side::Target)) / 2.0,
    }
}

/// Mean tfidf of a corpus pair; `Both` averages the two side means.
pub fn mean_tfidf(corpus: &ParallelCorpus, table: &IdfTable, id: PairId, selector: SideSelector) -> f64 {
    combine(selector, |side| side_mean_tfidf(corpus, table, id, side))
}

pub fn avg_idf(corpus: &ParallelCorpus, table: &IdfTable, id: PairId, selector: SideSelector) -> f64 {
    combine(selector, |side| side_avg_idf(corpus, table, id, side))
}

pub fn score_mean_tfidf(corpus: &ParallelCorpus, selector: SideSelector) -> Vec<f64> {
    let table = IdfTable::new(corpus);
    (0..corpus.n_docs())
        .into_par_iter()
        .map(|id| mean_tfidf(corpus, &table, id, selector))
        .collect()
}

pub fn score_avg_idf(corpus: &ParallelCorpus, selector: SideSelector) -> Vec<f64> {
    let table = IdfTable::new(corpus);
    (0..corpus.n_docs())
        .into_par_iter()
        .map(|id| avg_idf(corpus, &table, id, selector))
        .collect()
}

/// Sparse vector with entries sorted by index and no zero weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
    norm: f64,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Self {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_unstable_by_key(|&(i, _)| i);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        entries.retain(|&(_, w)| w != 0.0);
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        SparseVector { entries, norm }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }
}

/// TF-IDF vector of a corpus pair, one entry per distinct token.
pub fn vectorize(corpus: &ParallelCorpus, table: &IdfTable, id: PairId, selector: SideSelector) -> SparseVector {
    let mut entries = Vec::new();
    for &side in selector.sides() {
        let offset = table.offset(selector, side);
        for (tok, tf) in term_counts(corpus.side(side).pair_token_ids(id)) {
            entries.push((offset + tok, tf as f64 * table.get(side, tok)));
        }
    }
    SparseVector::new(entries)
}

pub fn vectorize_all(corpus: &ParallelCorpus, table: &IdfTable, selector: SideSelector) -> Vec<SparseVector> {
    (0..corpus.n_docs())
        .into_par_iter()
        .map(|id| vectorize(corpus, table, id, selector))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN4: f64 = 1.386_294_361_119_890_6;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn four_docs() -> ParallelCorpus {
        // "a" in one source doc, "b" in all four
        ParallelCorpus::from_texts(&[("a b", "w"), ("b", "x"), ("b c", "y"), ("b d", "z")]).unwrap()
    }

    #[test]
    fn idf_examples() {
        let c = four_docs();
        assert_eq!(idf("b", Side::Source, &c).unwrap(), 0.0);
        assert!((idf("a", Side::Source, &c).unwrap() - LN4).abs() < 1e-6);
        assert!((idf("never-seen", Side::Source, &c).unwrap() - LN4).abs() < 1e-12);
        assert!(matches!(
            idf("a", Side::Source, &ParallelCorpus::empty()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tfidf_examples() {
        let c = ParallelCorpus::from_texts(&[("a a b", "x"), ("b", "y")]).unwrap();
        let side = toks("a a b");
        let v = tfidf("a", &side, Side::Source, &c).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((v - 1.386294).abs() < 1e-6);
        assert_eq!(tfidf("q", &side, Side::Source, &c).unwrap(), 0.0);
        assert_eq!(tfidf("b", &side, Side::Source, &c).unwrap(), 0.0);
    }

    #[test]
    fn mean_tfidf_examples() {
        let c = four_docs();
        let t = IdfTable::new(&c);
        // source of pair 0: a (idf ln4) and b (idf 0)
        let m = mean_tfidf(&c, &t, 0, SideSelector::Source);
        assert!((m - LN4 / 2.0).abs() < 1e-12);
        assert_eq!(mean_tfidf(&c, &t, 1, SideSelector::Source), 0.0);
        // every target token is unique to its doc: idf ln4, tf 1
        assert!((mean_tfidf(&c, &t, 1, SideSelector::Target) - LN4).abs() < 1e-12);
        assert!((mean_tfidf(&c, &t, 1, SideSelector::Both) - LN4 / 2.0).abs() < 1e-12);
        assert_eq!(mean_tfidf_tokens(&[], Side::Source, &c).unwrap(), 0.0);
    }

    #[test]
    fn avg_idf_examples() {
        let c = four_docs();
        let t = IdfTable::new(&c);
        assert!((avg_idf(&c, &t, 0, SideSelector::Source) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(avg_idf(&c, &t, 1, SideSelector::Source), 0.0);
        let oov = avg_idf_tokens(&toks("zzz"), Side::Source, &c).unwrap();
        assert!((oov - LN4).abs() < 1e-12);
    }

    #[test]
    fn vectorize_examples() {
        let c = ParallelCorpus::from_texts(&[("a a b", "x"), ("b", "x y")]).unwrap();
        let t = IdfTable::new(&c);
        let v = vectorize(&c, &t, 0, SideSelector::Source);
        assert_eq!(v.entries(), &[(0, 2.0 * 2f64.ln())]);
        // all-idf-0 side
        let v = vectorize(&c, &t, 1, SideSelector::Source);
        assert!(v.is_empty());
        assert_eq!(v.norm(), 0.0);
        // both: target ids are offset past the source vocabulary
        let v = vectorize(&c, &t, 1, SideSelector::Both);
        assert_eq!(v.entries(), &[(2 + 1, 2f64.ln())]);
        assert_eq!(t.dim(SideSelector::Both), 4);
    }

    #[test]
    fn sparse_vector_merges_and_drops_zeros() {
        let v = SparseVector::new(vec![(3, 1.0), (1, 0.0), (3, 2.0), (0, 4.0)]);
        assert_eq!(v.entries(), &[(0, 4.0), (3, 3.0)]);
        assert_eq!(v.norm(), 5.0);
        assert_eq!(v.get(3), 3.0);
        assert_eq!(v.get(1), 0.0);
    }

    #[test]
    fn idf_decreases_when_doc_added() {
        let before = ParallelCorpus::from_texts(&[("a", "x"), ("b", "y"), ("c", "z")]).unwrap();
        let after =
            ParallelCorpus::from_texts(&[("a", "x"), ("b", "y"), ("c", "z"), ("a d", "w")]).unwrap();
        // N/n_a: 3 -> 2
        assert!(idf("a", Side::Source, &after).unwrap() < idf("a", Side::Source, &before).unwrap());
    }
}
