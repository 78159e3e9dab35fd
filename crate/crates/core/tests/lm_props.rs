mod common;

use std::collections::{HashMap, HashSet};

use common::{rng, toks};
use mtsel_core::lm::{moore_lewis, score_moore_lewis, NGramLM, SideModels};
use mtsel_core::lexical::SideSelector;
use mtsel_core::ParallelCorpus;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_sentences(r: &mut ChaCha8Rng, prefix: &str, vocab: usize, n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let len = r.gen_range(1..=10);
            (0..len).map(|_| format!("{prefix}{}", r.gen_range(0..vocab))).collect()
        })
        .collect()
}

/// Counts n-grams over string tokens, independently of the model's id tables.
struct Oracle {
    order: usize,
    alpha: f64,
    vocab: HashSet<String>,
    counts: HashMap<Vec<String>, f64>,
    totals: HashMap<Vec<String>, f64>,
}

impl Oracle {
    fn train(data: &[Vec<String>], order: usize, alpha: f64) -> Oracle {
        let mut o = Oracle {
            order,
            alpha,
            vocab: HashSet::new(),
            counts: HashMap::new(),
            totals: HashMap::new(),
        };
        for s in data {
            o.vocab.extend(s.iter().cloned());
            for gram in o.grams(s) {
                *o.counts.entry(gram.clone()).or_default() += 1.0;
                *o.totals.entry(gram[..order - 1].to_vec()).or_default() += 1.0;
            }
        }
        o
    }

    fn grams(&self, s: &[String]) -> Vec<Vec<String>> {
        let mut padded = vec!["<s>".to_owned(); self.order - 1];
        padded.extend(s.iter().map(|w| {
            if self.vocab.is_empty() || self.vocab.contains(w) {
                w.clone()
            } else {
                "<unk>".to_owned()
            }
        }));
        padded.windows(self.order).map(<[String]>::to_vec).collect()
    }

    fn cross_entropy(&self, s: &[String]) -> f64 {
        let v = self.vocab.len() as f64;
        let mut p = 1.0f64;
        let mut logs = 0.0;
        for gram in self.grams(s) {
            let c = self.counts.get(&gram).copied().unwrap_or(0.0);
            let t = self.totals.get(&gram[..self.order - 1]).copied().unwrap_or(0.0);
            let q = (c + self.alpha) / (t + self.alpha * (v + 1.0));
            p *= q;
            logs += q.ln();
        }
        // the product underflows quickly, so fall back to the log sum
        if p > 1e-300 {
            -p.ln() / s.len() as f64
        } else {
            -logs / s.len() as f64
        }
    }
}

#[test]
fn cross_entropy_matches_oracle() {
    let mut r = rng(21);
    for trial in 0..100 {
        let order = 1 + trial % 4;
        let alpha = [0.01, 0.1, 0.5, 1.0][trial % 4];
        let n = r.gen_range(1..10);
        let data = random_sentences(&mut r, "w", 6, n);
        let lm = NGramLM::train(&data, order, alpha).unwrap();
        let oracle = Oracle::train(&data, order, alpha);
        for s in random_sentences(&mut r, "w", 8, 10) {
            let got = lm.cross_entropy(&s).unwrap();
            let want = oracle.cross_entropy(&s);
            assert!((got - want).abs() <= 1e-9, "order {order}: {got} vs {want}");
        }
    }
}

#[test]
fn probabilities_normalize_over_vocab_and_unk() {
    let mut r = rng(22);
    for trial in 0..60 {
        let order = 1 + trial % 4;
        let n = r.gen_range(1..12);
        let data = random_sentences(&mut r, "w", 7, n);
        let lm = NGramLM::train(&data, order, 0.1).unwrap();
        let vocab: Vec<String> = lm.vocab().map(str::to_owned).collect();
        let mut contexts: Vec<Vec<String>> = lm
            .observed_contexts()
            .into_iter()
            .map(|c| c.into_iter().filter(|t| t != "<s>").collect())
            .collect();
        contexts.push(toks("never seen here"));
        for ctx in contexts {
            let mut total = lm.unk_prob(&ctx);
            for w in &vocab {
                let p = lm.prob(&ctx, w);
                assert!(p > 0.0 && p <= 1.0);
                total += p;
            }
            assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
        }
    }
}

#[test]
fn identical_models_give_zero_delta() {
    let mut r = rng(23);
    let data = random_sentences(&mut r, "w", 10, 30);
    let a = NGramLM::train(&data, 3, 0.1).unwrap();
    let b = NGramLM::train(&data, 3, 0.1).unwrap();
    for s in random_sentences(&mut r, "w", 12, 50) {
        assert_eq!(moore_lewis(&s, &a, &b).unwrap(), 0.0);
    }
}

#[test]
fn swapping_models_negates_exactly() {
    let mut r = rng(24);
    for _ in 0..20 {
        let lm_a = NGramLM::train(&random_sentences(&mut r, "w", 8, 15), 3, 0.1).unwrap();
        let lm_b = NGramLM::train(&random_sentences(&mut r, "w", 8, 15), 3, 0.1).unwrap();
        for s in random_sentences(&mut r, "w", 8, 10) {
            let d = moore_lewis(&s, &lm_a, &lm_b).unwrap();
            assert_eq!(moore_lewis(&s, &lm_b, &lm_a).unwrap(), -d);
        }
    }
}

#[test]
fn disjoint_domains_prefer_their_own_model() {
    let mut r = rng(25);
    for _ in 0..100 {
        let inside = random_sentences(&mut r, "a", 10, 20);
        let outside = random_sentences(&mut r, "b", 10, 20);
        let lm_in = NGramLM::train(&inside, 3, 0.1).unwrap();
        let lm_out = NGramLM::train(&outside, 3, 0.1).unwrap();
        let x = inside.choose(&mut r).unwrap();
        assert!(moore_lewis(x, &lm_in, &lm_out).unwrap() > 0.0);
        let y = outside.choose(&mut r).unwrap();
        assert!(moore_lewis(y, &lm_in, &lm_out).unwrap() < 0.0);
    }
}

#[test]
fn bilingual_swap_negates() {
    let in_c = ParallelCorpus::from_texts(&[("a b c", "x y"), ("a c", "y z"), ("b b", "x")]).unwrap();
    let out_c = ParallelCorpus::from_texts(&[("d e", "p q"), ("a d", "q r")]).unwrap();
    let pool = ParallelCorpus::from_texts(&[("a b", "x y"), ("d e f", "q"), ("c", "z z")]).unwrap();
    let lin = SideModels::train(&in_c, 3, 0.1).unwrap();
    let lout = SideModels::train(&out_c, 3, 0.1).unwrap();
    let fwd = score_moore_lewis(&pool, &lin, &lout, SideSelector::Both).unwrap();
    let back = score_moore_lewis(&pool, &lout, &lin, SideSelector::Both).unwrap();
    let src = score_moore_lewis(&pool, &lin, &lout, SideSelector::Source).unwrap();
    let tgt = score_moore_lewis(&pool, &lin, &lout, SideSelector::Target).unwrap();
    for i in 0..pool.n_docs() {
        assert_eq!(fwd[i], -back[i]);
        assert_eq!(fwd[i], src[i] + tgt[i]);
    }
}

#[test]
fn dump_round_trip_is_bit_identical() {
    let mut r = rng(26);
    let dir = tempfile::tempdir().unwrap();
    for order in 1..=4 {
        let lm = NGramLM::train(&random_sentences(&mut r, "w", 9, 25), order, 0.37).unwrap();
        let path = dir.path().join(format!("lm{order}.txt"));
        lm.save(&path).unwrap();
        let back = NGramLM::load(&path).unwrap();
        for s in random_sentences(&mut r, "w", 11, 20) {
            assert_eq!(
                lm.cross_entropy(&s).unwrap().to_bits(),
                back.cross_entropy(&s).unwrap().to_bits()
            );
        }
        let again = dir.path().join("again.txt");
        back.save(&again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn invalid_training_input_is_rejected() {
    let none: Vec<Vec<String>> = Vec::new();
    assert!(NGramLM::train(&none, 3, 0.1).is_err());
    assert!(NGramLM::train(&[Vec::<String>::new()], 3, 0.1).is_err());
    assert!(NGramLM::train(&[toks("a")], 0, 0.1).is_err());
    assert!(NGramLM::train(&[toks("a")], 2, 0.0).is_err());
    let lm = NGramLM::train(&[toks("a")], 2, 0.1).unwrap();
    assert!(lm.cross_entropy(&[]).is_err());
}

proptest! {
    #[test]
    fn cross_entropy_is_finite_and_non_negative(
        data in prop::collection::vec(prop::collection::vec("[a-d]", 1..8), 1..8),
        probe in prop::collection::vec("[a-f]", 1..10),
        order in 1usize..5,
        alpha in 0.01f64..2.0,
    ) {
        let lm = NGramLM::train(&data, order, alpha).unwrap();
        let h = lm.cross_entropy(&probe).unwrap();
        prop_assert!(h.is_finite() && h >= 0.0);
    }
}
