//! Budgeted top-k selection over score columns, and the seeded random baseline.
//!
//! Rankings order pairs by score in the column's direction; equal scores are
//! ordered by ascending pair id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::PairId;
use crate::error::{Error, Result};
use crate::scores::{Direction, ScoreColumn};

pub const DEFAULT_SEED: u64 = 42;
pub const TIE_BREAK: &str = "ascending_id";

const PAR_CHUNK: usize = 1 << 16;

/// SplitMix64 (Steele, Lea & Flood 2014): a 64-bit counter-based generator.
///
/// `state += 0x9E3779B97F4A7C15`, then the output is the state mixed by two
/// xor-shift-multiply rounds. Pure 64-bit wrapping arithmetic, so the stream is
/// identical on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Unbiased draw from `0..bound` by rejection of the short final interval.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }
}

/// `Less` when `a` ranks ahead of `b`.
fn rank_order(direction: Direction, a: (f64, PairId), b: (f64, PairId)) -> Ordering {
    let by_score = match direction {
        Direction::HigherBetter => b.0.partial_cmp(&a.0),
        Direction::LowerBetter => a.0.partial_cmp(&b.0),
    }
    .expect("scores are finite");
    by_score.then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    id: PairId,
    direction: Direction,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Better entries compare smaller, so a max-heap keeps the worst on top.
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(self.direction, (self.score, self.id), (other.score, other.id))
    }
}

fn check_column(column: &ScoreColumn, n_docs: usize) -> Result<()> {
    if column.len() != n_docs {
        return Err(Error::domain(format!(
            "column `{}` covers {} of {} pairs",
            column.method,
            column.len(),
            n_docs
        )));
    }
    column.validate()
}

/// Full ranking of the corpus ids under `column`.
pub fn rank(column: &ScoreColumn, n_docs: usize) -> Result<Vec<PairId>> {
    check_column(column, n_docs)?;
    let mut ids: Vec<PairId> = (0..n_docs).collect();
    let dir = column.direction;
    let scores = &column.scores;
    ids.par_sort_unstable_by(|&a, &b| rank_order(dir, (scores[a], a), (scores[b], b)));
    Ok(ids)
}

fn heap_top_k(entries: impl Iterator<Item = Entry>, k: usize) -> Vec<Entry> {
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for e in entries {
        if heap.len() < k {
            heap.push(e);
        } else if let Some(worst) = heap.peek() {
            if e < *worst {
                heap.pop();
                heap.push(e);
            }
        }
    }
    heap.into_vec()
}

/// The first `min(k, n)` ids of the ranking, without materializing it.
pub fn select_top_k(column: &ScoreColumn, n_docs: usize, k: usize) -> Result<Vec<PairId>> {
    check_column(column, n_docs)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if k >= n_docs {
        return rank(column, n_docs);
    }
    let dir = column.direction;
    let mut kept: Vec<Entry> = column
        .scores
        .par_chunks(PAR_CHUNK)
        .enumerate()
        .flat_map_iter(|(chunk, scores)| {
            let base = chunk * PAR_CHUNK;
            let entries = scores.iter().enumerate().map(move |(i, &score)| Entry {
                score,
                id: base + i,
                direction: dir,
            });
            heap_top_k(entries, k)
        })
        .collect();
    kept.sort_unstable();
    kept.truncate(k);
    Ok(kept.into_iter().map(|e| e.id).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMeta {
    pub method: String,
    pub k: usize,
    pub selected: usize,
    pub direction: Option<Direction>,
    pub seed: Option<u64>,
    pub tie_break: String,
    #[serde(default)]
    pub flags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: String,
    pub k: usize,
    pub direction: Option<Direction>,
    pub seed: Option<u64>,
    /// Full ordering; only materialized when requested.
    pub ranking: Option<Vec<PairId>>,
    pub selected: Vec<PairId>,
    pub flags: BTreeMap<String, String>,
}

/// Takes the first `min(k, n)` ids of a ranking.
pub fn top_k(ranking: &[PairId], k: usize, method: &str) -> SelectionResult {
    SelectionResult {
        method: method.to_owned(),
        k,
        direction: None,
        seed: None,
        ranking: Some(ranking.to_vec()),
        selected: ranking[..k.min(ranking.len())].to_vec(),
        flags: BTreeMap::new(),
    }
}

/// Selects the best `k` pairs of `column`; with `emit_ranking` the full ranking is kept too.
pub fn select(column: &ScoreColumn, n_docs: usize, k: usize, emit_ranking: bool) -> Result<SelectionResult> {
    let mut result = if emit_ranking {
        top_k(&rank(column, n_docs)?, k, &column.method)
    } else {
        SelectionResult {
            method: column.method.clone(),
            k,
            direction: None,
            seed: None,
            ranking: None,
            selected: select_top_k(column, n_docs, k)?,
            flags: BTreeMap::new(),
        }
    };
    result.direction = Some(column.direction);
    result.flags = column.flags.clone();
    Ok(result)
}

/// Uniform sample of `k` ids from `0..n_docs` without replacement.
///
/// A partial Fisher-Yates shuffle driven by [`SplitMix64`]: step `i` swaps
/// position `i` with `i + below(n - i)`. The selection is the first `k`
/// positions in draw order; the ranking, when requested, is the completed shuffle.
pub fn random_sample(n_docs: usize, k: usize, seed: u64, emit_ranking: bool) -> Result<SelectionResult> {
    if k > n_docs {
        return Err(Error::domain(format!(
            "cannot sample {k} of {n_docs} pairs without replacement"
        )));
    }
    let mut ids: Vec<PairId> = (0..n_docs).collect();
    let mut rng = SplitMix64::new(seed);
    let steps = if emit_ranking { n_docs } else { k };
    for i in 0..steps {
        let j = i + rng.below((n_docs - i) as u64) as usize;
        ids.swap(i, j);
    }
    let selected = ids[..k].to_vec();
    Ok(SelectionResult {
        method: "random".to_owned(),
        k,
        direction: None,
        seed: Some(seed),
        ranking: emit_ranking.then_some(ids),
        selected,
        flags: BTreeMap::new(),
    })
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: SelectionMeta,
}

#[derive(Serialize, Deserialize)]
struct IdLine {
    id: PairId,
}

impl SelectionResult {
    pub fn meta(&self) -> SelectionMeta {
        SelectionMeta {
            method: self.method.clone(),
            k: self.k,
            selected: self.selected.len(),
            direction: self.direction,
            seed: self.seed,
            tie_break: TIE_BREAK.to_owned(),
            flags: self.flags.clone(),
        }
    }

    /// Header line `{"meta": {...}}` followed by one `{"id": n}` line per selected id.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&MetaLine { meta: self.meta() }).expect("serializable");
        out.push('\n');
        for &id in &self.selected {
            out.push_str(&serde_json::to_string(&IdLine { id }).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn save_ranking(&self, path: &Path) -> Result<()> {
        let ranking = self
            .ranking
            .as_ref()
            .ok_or_else(|| Error::domain("ranking was not materialized"))?;
        let mut f = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for id in ranking {
            writeln!(f, "{id}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::Malformed {
            row: 1,
            reason: "empty selection file".into(),
        })?;
        let meta: MetaLine = serde_json::from_str(&header).map_err(|e| Error::Malformed {
            row: 1,
            reason: e.to_string(),
        })?;
        let mut selected = Vec::with_capacity(meta.meta.selected);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: IdLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                row: i + 2,
                reason: e.to_string(),
            })?;
            selected.push(row.id);
        }
        if selected.len() != meta.meta.selected {
            return Err(Error::domain(format!(
                "selection header announces {} ids but {} follow",
                meta.meta.selected,
                selected.len()
            )));
        }
        let m = meta.meta;
        Ok(SelectionResult {
            method: m.method,
            k: m.k,
            direction: m.direction,
            seed: m.seed,
            ranking: None,
            selected,
            flags: m.flags,
        })
    }
}
