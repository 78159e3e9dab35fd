//! Distance from the TF-IDF centroid (FD-Score).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::lexical::{vectorize_all, IdfTable, SideSelector, SparseVector};

/// Partial sums are formed over fixed-size chunks and then added in chunk
/// order, so the centroid is bit-identical for any thread count.
const REDUCE_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// `1 - cos(v, c)`; a zero vector is at distance 1.
    Cosine,
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(Error::domain(format!("unknown distance metric `{other}`"))),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    weights: Vec<f64>,
    member_count: usize,
    /// Sum of squared weights and number of non-zero weights.
    sq_norm: f64,
    nonzero: usize,
}

impl Centroid {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn member_count(&self) -> usize {
        self.member_count
    }

    pub fn get(&self, index: u32) -> f64 {
        self.weights.get(index as usize).copied().unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.sq_norm.sqrt()
    }
}

fn accumulate(sum: &mut Vec<f64>, v: &SparseVector) {
    if let Some(&(last, _)) = v.entries().last() {
        if sum.len() <= last as usize {
            sum.resize(last as usize + 1, 0.0);
        }
    }
    for &(i, w) in v.entries() {
        sum[i as usize] += w;
    }
}

/// Componentwise mean of `vectors`; absent entries count as zero.
pub fn centroid(vectors: &[SparseVector]) -> Result<Centroid> {
    if vectors.is_empty() {
        return Err(Error::domain("centroid of an empty collection"));
    }
    let partials: Vec<Vec<f64>> = vectors
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut sum = Vec::new();
            for v in chunk {
                accumulate(&mut sum, v);
            }
            sum
        })
        .collect();
    let mut weights: Vec<f64> = Vec::new();
    for part in partials {
        if weights.len() < part.len() {
            weights.resize(part.len(), 0.0);
        }
        for (w, p) in weights.iter_mut().zip(part) {
            *w += p;
        }
    }
    let n = vectors.len() as f64;
    for w in &mut weights {
        *w /= n;
    }
    let sq_norm = weights.iter().map(|w| w * w).sum();
    let nonzero = weights.iter().filter(|w| **w != 0.0).count();
    Ok(Centroid {
        weights,
        member_count: vectors.len(),
        sq_norm,
        nonzero,
    })
}

/// Euclidean distance between `v` and the centroid.
///
/// Only the support of `v` is visited. When `v` covers every non-zero centroid
/// component the off-support mass is exactly zero, so `fd_score(c, c) == 0`.
pub fn fd_score(v: &SparseVector, c: &Centroid) -> f64 {
    let mut on_support = 0.0;
    let mut centroid_on_support = 0.0;
    let mut covered = 0;
    for &(i, w) in v.entries() {
        let ci = c.get(i);
        let d = w - ci;
        on_support += d * d;
        if ci != 0.0 {
            centroid_on_support += ci * ci;
            covered += 1;
        }
    }
    let off_support = if covered == c.nonzero {
        0.0
    } else {
        (c.sq_norm - centroid_on_support).max(0.0)
    };
    (on_support + off_support).sqrt()
}

pub fn cosine_distance(v: &SparseVector, c: &Centroid) -> f64 {
    let denom = v.norm() * c.norm();
    if denom == 0.0 {
        return 1.0;
    }
    let dot: f64 = v.entries().iter().map(|&(i, w)| w * c.get(i)).sum();
    (1.0 - dot / denom).clamp(0.0, 2.0)
}

pub fn distance(v: &SparseVector, c: &Centroid, metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::Euclidean => fd_score(v, c),
        DistanceMetric::Cosine => cosine_distance(v, c),
    }
}

/// FD-Score of every pair: distance of its TF-IDF vector from the corpus centroid.
pub fn score_fd(corpus: &ParallelCorpus, selector: SideSelector, metric: DistanceMetric) -> Result<Vec<f64>> {
    let table = IdfTable::new(corpus);
    let vectors = vectorize_all(corpus, &table, selector);
    let c = centroid(&vectors)?;
    Ok(vectors.par_iter().map(|v| distance(v, &c, metric)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(entries: &[(u32, f64)]) -> SparseVector {
        SparseVector::new(entries.to_vec())
    }

    #[test]
    fn centroid_examples() {
        let v = sv(&[(0, 1.5), (4, -2.0)]);
        let c = centroid(std::slice::from_ref(&v)).unwrap();
        assert_eq!(c.get(0), 1.5);
        assert_eq!(c.get(4), -2.0);
        assert_eq!(c.member_count(), 1);

        let c = centroid(&[sv(&[(0, 2.0)]), sv(&[])]).unwrap();
        assert_eq!(c.get(0), 1.0);

        let c = centroid(&[v.clone(), v.clone()]).unwrap();
        assert_eq!(fd_score(&v, &c), 0.0);

        assert!(centroid(&[]).is_err());
    }

    #[test]
    fn fd_score_examples() {
        let c = centroid(&[sv(&[(0, 1.0)])]).unwrap();
        assert_eq!(fd_score(&sv(&[(0, 1.0)]), &c), 0.0);
        assert_eq!(fd_score(&sv(&[(0, 3.0)]), &c), 2.0);

        let zero = centroid(&[sv(&[])]).unwrap();
        assert_eq!(fd_score(&sv(&[(0, 3.0), (1, 4.0)]), &zero), 5.0);
    }

    #[test]
    fn fd_score_counts_off_support_mass() {
        let c = centroid(&[sv(&[(0, 2.0), (1, 4.0)]), sv(&[(1, 2.0)])]).unwrap();
        // c = (1, 3); v = (0, 0, 5) -> sqrt(1 + 9 + 25)
        assert!((fd_score(&sv(&[(2, 5.0)]), &c) - 35f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_distance_cases() {
        let c = centroid(&[sv(&[(0, 1.0)])]).unwrap();
        assert_eq!(cosine_distance(&sv(&[(0, 7.0)]), &c), 0.0);
        assert_eq!(cosine_distance(&sv(&[(1, 7.0)]), &c), 1.0);
        assert_eq!(cosine_distance(&sv(&[]), &c), 1.0);
    }

    #[test]
    fn score_fd_on_corpus() {
        let corpus =
            ParallelCorpus::from_texts(&[("a", "x"), ("a", "y"), ("b c d", "x")]).unwrap();
        let scores = score_fd(&corpus, SideSelector::Both, DistanceMetric::Euclidean).unwrap();
        assert_eq!(scores.len(), 3);
        // the odd one out is farthest
        assert!(scores[2] > scores[0] && scores[2] > scores[1]);
    }
}
