mod common;

use std::collections::BTreeSet;

use common::{distinct_scores, rng};
use mtsel_core::selection::{random_sample, rank, select, select_top_k, SplitMix64};
use mtsel_core::{Direction, ScoreColumn, SelectionResult};
use proptest::prelude::*;
use rand::Rng;

fn column(scores: Vec<f64>) -> ScoreColumn {
    ScoreColumn::new("m", Direction::HigherBetter, scores)
}

fn best_subset_total(scores: &[f64], k: usize) -> f64 {
    let n = scores.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let total: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).sum();
        best = best.max(total);
    }
    best
}

#[test]
fn top_k_reaches_the_exhaustive_optimum() {
    let mut r = rng(31);
    for _ in 0..500 {
        let n = r.gen_range(1..=12);
        let k = r.gen_range(0..=n);
        let scores = distinct_scores(&mut r, n);
        let chosen = select_top_k(&column(scores.clone()), n, k).unwrap();
        assert_eq!(chosen.len(), k);
        let total: f64 = chosen.iter().map(|&i| scores[i]).sum();
        let best = if k == 0 { 0.0 } else { best_subset_total(&scores, k) };
        assert!((total - best).abs() <= 1e-9, "{total} vs {best}");
    }
}

#[test]
fn monotone_transforms_keep_the_selected_set() {
    let mut r = rng(32);
    for _ in 0..100 {
        let n = r.gen_range(1..200);
        let k = r.gen_range(0..=n);
        let scores = distinct_scores(&mut r, n);
        let base: BTreeSet<usize> = select_top_k(&column(scores.clone()), n, k).unwrap().into_iter().collect();
        let transforms: [fn(f64) -> f64; 3] = [|x| 2.0 * x + 1.0, |x| x * x * x, f64::exp];
        for g in transforms {
            let mapped: Vec<f64> = scores.iter().map(|&x| g(x)).collect();
            let got: BTreeSet<usize> = select_top_k(&column(mapped), n, k).unwrap().into_iter().collect();
            assert_eq!(got, base);
        }
    }
}

#[test]
fn ties_break_by_ascending_id() {
    let c = column(vec![1.0, 2.0, 2.0, 0.0, 2.0]);
    assert_eq!(select_top_k(&c, 5, 2).unwrap(), vec![1, 2]);
    assert_eq!(rank(&c, 5).unwrap(), vec![1, 2, 4, 0, 3]);
    let zeros = column(vec![0.0, -0.0, 0.0]);
    assert_eq!(rank(&zeros, 3).unwrap(), vec![0, 1, 2]);
}

#[test]
fn lower_better_reverses_the_order() {
    let mut r = rng(33);
    let scores = distinct_scores(&mut r, 50);
    let up = rank(&column(scores.clone()), 50).unwrap();
    let down = rank(&ScoreColumn::new("m", Direction::LowerBetter, scores), 50).unwrap();
    let mut rev = down.clone();
    rev.reverse();
    assert_eq!(up, rev);
}

#[test]
fn heap_agrees_with_full_sort_beyond_one_chunk() {
    let mut r = rng(34);
    let n = 50_000;
    // coarse scores force many ties across chunk boundaries
    let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..100) as f64).collect();
    let c = column(scores);
    let full = rank(&c, n).unwrap();
    for k in [0, 1, 17, 1000, 4096, 49_999, 50_000, 60_000] {
        let got = select_top_k(&c, n, k).unwrap();
        assert_eq!(got, full[..k.min(n)]);
    }
}

#[test]
fn bad_columns_are_rejected() {
    assert!(select_top_k(&column(vec![1.0, 2.0]), 3, 1).is_err());
    assert!(select_top_k(&column(vec![1.0, f64::NAN]), 2, 1).is_err());
    assert!(random_sample(3, 4, 42, false).is_err());
}

#[test]
fn random_sample_reference_values() {
    let mut g = SplitMix64::new(42);
    let mut ids: Vec<usize> = (0..10).collect();
    for i in 0..3 {
        let j = i + g.below((10 - i) as u64) as usize;
        ids.swap(i, j);
    }
    let s = random_sample(10, 3, 42, false).unwrap();
    assert_eq!(s.selected, ids[..3]);
    assert_eq!(s.seed, Some(42));
}

#[test]
fn selection_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(35);
    let scores = distinct_scores(&mut r, 30);
    let c = column(scores).with_flag("side", "both");
    let s = select(&c, 30, 7, true).unwrap();
    let path = dir.path().join("sel.jsonl");
    s.save(&path).unwrap();
    let back = SelectionResult::load(&path).unwrap();
    assert_eq!(back.selected, s.selected);
    assert_eq!(back.meta(), s.meta());
    assert_eq!(back.to_jsonl(), s.to_jsonl());
}

proptest! {
    #[test]
    fn random_sample_is_a_uniform_prefix_family(n in 0usize..300, seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let k = (n as f64 * frac) as usize;
        let s = random_sample(n, k, seed, true).unwrap();
        prop_assert_eq!(s.selected.len(), k);
        let distinct: BTreeSet<_> = s.selected.iter().collect();
        prop_assert_eq!(distinct.len(), k);
        prop_assert!(s.selected.iter().all(|&i| i < n));
        // without the full shuffle the prefix is the same draw
        let lean = random_sample(n, k, seed, false).unwrap();
        prop_assert_eq!(&lean.selected, &s.selected);
        let ranking = s.ranking.unwrap();
        let mut sorted = ranking.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        if k < n {
            let bigger = random_sample(n, k + 1, seed, false).unwrap();
            prop_assert_eq!(&bigger.selected[..k], &s.selected[..]);
        }
    }

    #[test]
    fn below_stays_in_bounds(seed in any::<u64>(), bound in 1u64..u64::MAX) {
        let mut g = SplitMix64::new(seed);
        for _ in 0..16 {
            prop_assert!(g.below(bound) < bound);
        }
    }

    #[test]
    fn selection_is_a_prefix_of_the_ranking(scores in prop::collection::vec(-1e6f64..1e6, 0..80), k in 0usize..100) {
        let n = scores.len();
        let c = column(scores);
        let full = rank(&c, n).unwrap();
        let s = select(&c, n, k, false).unwrap();
        prop_assert_eq!(&s.selected[..], &full[..k.min(n)]);
    }
}
