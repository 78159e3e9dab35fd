#![allow(dead_code)]

use mtsel_core::ParallelCorpus;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn sentence(rng: &mut ChaCha8Rng, vocab: &[String], max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random corpus of 1..=max_pairs distinct pairs over a vocabulary of at most
/// `max_vocab` types per side.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_pairs: usize, max_vocab: usize) -> ParallelCorpus {
    let v = rng.gen_range(1..=max_vocab);
    let src_vocab: Vec<String> = (0..v).map(|i| format!("s{i}")).collect();
    let tgt_vocab: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
    let n = rng.gen_range(1..=max_pairs);
    let mut seen = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for _ in 0..n * 4 {
        if pairs.len() == n {
            break;
        }
        let s = sentence(rng, &src_vocab, 8);
        let t = sentence(rng, &tgt_vocab, 8);
        if seen.insert((s.clone(), t.clone())) {
            pairs.push((s, t));
        }
    }
    ParallelCorpus::from_texts(&pairs).unwrap()
}

/// `n` distinct finite scores in random order.
pub fn distinct_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.25 - 1.0 + rng.gen::<f64>() * 0.1).collect();
    v.shuffle(rng);
    v
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
