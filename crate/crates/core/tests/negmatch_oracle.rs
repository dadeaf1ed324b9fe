use std::collections::BTreeMap;

use humor_core::negmatch::{
    bin_quotas, build_target_histogram, match_negatives, text_stats, StatsHistogram,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| {
            let len = rng.random_range(1..9);
            (0..len)
                .map(|_| rng.random_range(b'a'..=b'z') as char)
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn jokes(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let w = rng.random_range(3..14);
            sentence(&mut rng, w)
        })
        .collect()
}

fn histogram_of(sentences: &[String], like: &StatsHistogram) -> BTreeMap<(usize, usize), u64> {
    let mut out = BTreeMap::new();
    for s in sentences {
        *out.entry(like.cell_of(text_stats(s))).or_insert(0) += 1;
    }
    out
}

#[test]
fn output_reproduces_largest_remainder_quotas() {
    let target = build_target_histogram(&jokes(300, 1), 2, 10).unwrap();
    let corpus = jokes(20_000, 2);
    for n in [1u64, 7, 250, 1000] {
        let out = match_negatives(&corpus, &target, n, 3).unwrap();
        let quotas: BTreeMap<_, _> = bin_quotas(&target, n)
            .unwrap()
            .into_iter()
            .filter(|(_, q)| *q > 0)
            .collect();
        assert_eq!(histogram_of(&out.sentences, &target), quotas);
        assert_eq!(out.sentences.len() as u64, n);
        for b in &out.report.bins {
            assert_eq!(b.filled, b.quota);
        }
    }
}

#[test]
fn self_matching_reproduces_target_exactly() {
    let j = jokes(500, 4);
    let target = build_target_histogram(&j, 2, 10).unwrap();
    let out = match_negatives(&j, &target, j.len() as u64, 5).unwrap();
    assert_eq!(histogram_of(&out.sentences, &target), target.joint_counts);
    assert_eq!(out.sentences, j);
}

#[test]
fn chi_square_below_99th_percentile() {
    let target = build_target_histogram(&jokes(2_000, 6), 2, 10).unwrap();
    let corpus = jokes(50_000, 7);
    let n = 1_000u64;
    let out = match_negatives(&corpus, &target, n, 8).unwrap();
    let observed = histogram_of(&out.sentences, &target);
    let total = target.total() as f64;
    let mut stat = 0.0;
    for (cell, &count) in &target.joint_counts {
        let expected = n as f64 * count as f64 / total;
        let o = *observed.get(cell).unwrap_or(&0) as f64;
        stat += (o - expected).powi(2) / expected;
    }
    let df = (target.joint_counts.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat} ≥ {critical} (df {df})");
}

#[test]
fn marginals_match_recount_on_random_strings() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let strings: Vec<String> = (0..1000)
        .map(|_| {
            let w = rng.random_range(0..30);
            sentence(&mut rng, w)
        })
        .collect();
    let h = build_target_histogram(&strings, 2, 10).unwrap();
    assert!(h.is_consistent());
    let mut words = vec![0u64; h.word_bins.counts.len()];
    let mut chars = vec![0u64; h.char_bins.counts.len()];
    for s in &strings {
        let w = s.split_whitespace().count();
        let c = s.trim().chars().count();
        words[w / 2] += 1;
        chars[c / 10] += 1;
    }
    assert_eq!(words, h.word_bins.counts);
    assert_eq!(chars, h.char_bins.counts);
}

#[test]
fn same_seed_same_selection() {
    let target = build_target_histogram(&jokes(100, 10), 2, 10).unwrap();
    let corpus = jokes(5_000, 11);
    let a = match_negatives(&corpus, &target, 100, 12).unwrap();
    let b = match_negatives(&corpus, &target, 100, 12).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quotas_sum_to_n(seed in any::<u64>(), n in 1u64..5_000) {
        let target = build_target_histogram(&jokes(50, seed), 2, 10).unwrap();
        let q = bin_quotas(&target, n).unwrap();
        prop_assert_eq!(q.values().sum::<u64>(), n);
        let total = target.total() as f64;
        for (cell, &quota) in &q {
            let exact = n as f64 * target.joint_counts[cell] as f64 / total;
            prop_assert!((quota as f64 - exact).abs() < 1.0);
        }
    }
}
