//! Reference-based quality metrics: TER for filtering, corpus BLEU for reports.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of accepted shifts per sentence.
pub const MAX_SHIFT_ITERATIONS: usize = 10;
/// Longest block considered for a shift.
pub const MAX_SHIFT_LEN: usize = 10;
/// Largest distance (in tokens) a block may travel.
pub const MAX_SHIFT_DIST: usize = 50;

pub const BLEU_MAX_ORDER: usize = 4;
/// Floor applied to a zero higher-order precision.
pub const BLEU_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Match,
    Substitute,
    /// A reference token missing from the hypothesis.
    Insert,
    /// A hypothesis token absent from the reference.
    Delete,
}

/// Moves `len` tokens starting at `start` so that they begin at `dest` in the
/// sequence left after removing them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shift {
    pub start: usize,
    pub len: usize,
    pub dest: usize,
}

impl Shift {
    pub fn apply<T: Clone>(&self, seq: &[T]) -> Vec<T> {
        let mut rest: Vec<T> = Vec::with_capacity(seq.len());
        rest.extend_from_slice(&seq[..self.start]);
        rest.extend_from_slice(&seq[self.start + self.len..]);
        let block = &seq[self.start..self.start + self.len];
        rest.splice(self.dest..self.dest, block.iter().cloned());
        rest
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
}

impl EditScript {
    pub fn total(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

/// Full TER outcome: shifts applied in order, then the alignment of the
/// shifted hypothesis against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TerAlignment {
    pub shifts: Vec<Shift>,
    pub ops: Vec<EditOp>,
    pub script: EditScript,
    pub reference_len: usize,
}

impl TerAlignment {
    pub fn score(&self) -> f64 {
        self.script.total() as f64 / self.reference_len as f64
    }
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimum-cost alignment of `hyp` to `reference`, as a list of operations.
pub fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Vec<EditOp> {
    let (n, m) = (hyp.len(), reference.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                ops.push(if same { EditOp::Match } else { EditOp::Substitute });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(EditOp::Delete);
            i -= 1;
        } else {
            ops.push(EditOp::Insert);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// For each reference position, the hypothesis position it is aligned to
/// (or where it would be inserted).
fn reference_to_hyp(ops: &[EditOp], ref_len: usize) -> Vec<usize> {
    let mut map = vec![0; ref_len];
    let (mut h, mut r) = (0, 0);
    for op in ops {
        match op {
            EditOp::Match | EditOp::Substitute => {
                map[r] = h;
                h += 1;
                r += 1;
            }
            EditOp::Insert => {
                map[r] = h;
                r += 1;
            }
            EditOp::Delete => h += 1,
        }
    }
    map
}

fn best_shift<T: PartialEq + Clone>(cur: &[T], reference: &[T], cur_ed: usize) -> Option<(Shift, Vec<T>, usize)> {
    let anchors = reference_to_hyp(&align(cur, reference), reference.len());
    let mut best: Option<(Shift, Vec<T>, usize)> = None;
    for start in 0..cur.len() {
        for len in 1..=MAX_SHIFT_LEN.min(cur.len() - start) {
            let block = &cur[start..start + len];
            let rest_len = cur.len() - len;
            for r in 0..=reference.len().saturating_sub(len) {
                if reference.len() < len || &reference[r..r + len] != block {
                    continue;
                }
                let anchor = anchors[r];
                if anchor > start && anchor <= start + len {
                    continue;
                }
                let base = if anchor > start { anchor - len } else { anchor };
                for dest in [base.wrapping_sub(1), base, base + 1] {
                    if dest > rest_len || dest == start || dest.abs_diff(start) > MAX_SHIFT_DIST {
                        continue;
                    }
                    let shift = Shift { start, len, dest };
                    let shifted = shift.apply(cur);
                    let ed = levenshtein(&shifted, reference);
                    let improves = ed + 1 < cur_ed;
                    let better = best.as_ref().is_none_or(|(_, _, b)| ed < *b);
                    if improves && better {
                        best = Some((shift, shifted, ed));
                    }
                }
            }
        }
    }
    best
}

/// TER with greedy best-first block shifts.
///
/// Each iteration applies the single shift that lowers the edit distance the
/// most, provided it pays for its own cost of one edit.
pub fn ter_alignment<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> Result<TerAlignment> {
    if reference.is_empty() {
        return Err(Error::domain("TER needs a non-empty reference"));
    }
    let mut cur = hyp.to_vec();
    let mut cur_ed = levenshtein(&cur, reference);
    let mut shifts = Vec::new();
    for _ in 0..MAX_SHIFT_ITERATIONS {
        if cur_ed <= 1 {
            break;
        }
        match best_shift(&cur, reference, cur_ed) {
            Some((shift, shifted, ed)) => {
                shifts.push(shift);
                cur = shifted;
                cur_ed = ed;
            }
            None => break,
        }
    }
    let ops = align(&cur, reference);
    let mut script = EditScript {
        shifts: shifts.len(),
        ..EditScript::default()
    };
    for op in &ops {
        match op {
            EditOp::Match => {}
            EditOp::Substitute => script.substitutions += 1,
            EditOp::Insert => script.insertions += 1,
            EditOp::Delete => script.deletions += 1,
        }
    }
    Ok(TerAlignment {
        shifts,
        ops,
        script,
        reference_len: reference.len(),
    })
}

pub fn ter<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> Result<f64> {
    Ok(ter_alignment(hyp, reference)?.score())
}

/// Sufficient statistics for corpus BLEU; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; BLEU_MAX_ORDER],
    pub totals: [u64; BLEU_MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn sentence<T: Eq + std::hash::Hash>(hyp: &[T], reference: &[T]) -> Self {
        let mut stats = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..BleuStats::default()
        };
        for n in 1..=BLEU_MAX_ORDER {
            if hyp.len() < n {
                break;
            }
            let mut ref_counts: HashMap<&[T], u64> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut hyp_counts: HashMap<&[T], u64> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_default() += 1;
            }
            stats.totals[n - 1] = (hyp.len() + 1 - n) as u64;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn merge(mut self, other: BleuStats) -> BleuStats {
        for n in 0..BLEU_MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// BLEU in [0, 100]. Orders with no hypothesis n-grams at all are left out
    /// of the geometric mean; a zero match count at order >= 2 is floored to
    /// [`BLEU_EPSILON`]; no unigram match gives 0.
    pub fn score(&self) -> f64 {
        if self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..BLEU_MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            let p = if self.matches[n] == 0 {
                BLEU_EPSILON
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += p.ln();
            orders += 1;
        }
        100.0 * self.brevity_penalty() * (log_sum / orders as f64).exp()
    }
}

/// Corpus BLEU with one reference per hypothesis.
pub fn corpus_bleu<T>(hypotheses: &[Vec<T>], references: &[Vec<T>]) -> Result<f64>
where
    T: Eq + std::hash::Hash + Sync,
{
    if hypotheses.len() != references.len() {
        return Err(Error::domain(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::domain("BLEU over an empty corpus"));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::domain(format!("reference {i} is empty")));
    }
    let stats = hypotheses
        .par_iter()
        .zip(references.par_iter())
        .map(|(h, r)| BleuStats::sentence(h, r))
        .reduce(BleuStats::default, BleuStats::merge);
    Ok(stats.score())
}
