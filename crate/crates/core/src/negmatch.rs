//! Selection of non-joke sentences whose joint (word count, character count)
//! histogram matches a joke corpus.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BinDeficit, CoreError, Result};
use crate::rng::seeded;

pub const DEFAULT_WORD_BIN_WIDTH: usize = 2;
pub const DEFAULT_CHAR_BIN_WIDTH: usize = 10;

/// Whitespace-delimited words and Unicode scalar values of the trimmed text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub word_count: usize,
    pub char_count: usize,
}

pub fn text_stats(sentence: &str) -> TextStats {
    let trimmed = sentence.trim();
    TextStats {
        word_count: trimmed.split_whitespace().count(),
        char_count: trimmed.chars().count(),
    }
}

/// Axis histogram with fixed-width bins `[i·width, (i+1)·width)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisBins {
    pub width: usize,
    pub counts: Vec<u64>,
}

impl AxisBins {
    fn new(width: usize) -> Self {
        Self {
            width,
            counts: Vec::new(),
        }
    }

    fn add(&mut self, bin: usize) {
        if self.counts.len() <= bin {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
    }

    /// Lower and upper (exclusive) edge of `bin`.
    pub fn edges(&self, bin: usize) -> (usize, usize) {
        (bin * self.width, (bin + 1) * self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsHistogram {
    pub word_bins: AxisBins,
    pub char_bins: AxisBins,
    /// Sparse joint counts keyed by `(word_bin, char_bin)`.
    pub joint_counts: BTreeMap<(usize, usize), u64>,
}

impl StatsHistogram {
    pub fn empty(word_bin_width: usize, char_bin_width: usize) -> Result<Self> {
        if word_bin_width == 0 || char_bin_width == 0 {
            return Err(CoreError::InvalidConfig(
                "bin widths must be positive".into(),
            ));
        }
        Ok(Self {
            word_bins: AxisBins::new(word_bin_width),
            char_bins: AxisBins::new(char_bin_width),
            joint_counts: BTreeMap::new(),
        })
    }

    pub fn cell_of(&self, stats: TextStats) -> (usize, usize) {
        (
            stats.word_count / self.word_bins.width,
            stats.char_count / self.char_bins.width,
        )
    }

    pub fn add(&mut self, sentence: &str) {
        let cell = self.cell_of(text_stats(sentence));
        self.word_bins.add(cell.0);
        self.char_bins.add(cell.1);
        *self.joint_counts.entry(cell).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.joint_counts.values().sum()
    }

    /// True when both axis histograms equal the marginals of the joint one.
    pub fn is_consistent(&self) -> bool {
        let mut words = Vec::new();
        let mut chars = Vec::new();
        for (&(w, c), &n) in &self.joint_counts {
            if words.len() <= w {
                words.resize(w + 1, 0);
            }
            if chars.len() <= c {
                chars.resize(c + 1, 0);
            }
            words[w] += n;
            chars[c] += n;
        }
        let trim = |v: &[u64]| {
            let end = v.iter().rposition(|&x| x != 0).map_or(0, |p| p + 1);
            v[..end].to_vec()
        };
        trim(&words) == trim(&self.word_bins.counts) && trim(&chars) == trim(&self.char_bins.counts)
    }
}

pub fn build_target_histogram<S: AsRef<str>>(
    jokes: &[S],
    word_bin_width: usize,
    char_bin_width: usize,
) -> Result<StatsHistogram> {
    if jokes.is_empty() {
        return Err(CoreError::EmptyInput("joke list"));
    }
    let mut h = StatsHistogram::empty(word_bin_width, char_bin_width)?;
    for j in jokes {
        h.add(j.as_ref());
    }
    Ok(h)
}

/// Largest-remainder apportionment of `n` over the joint cells of `target`.
/// Ties in the remainder go to the smaller `(word_bin, char_bin)` key.
pub fn bin_quotas(target: &StatsHistogram, n: u64) -> Result<BTreeMap<(usize, usize), u64>> {
    let total = target.total();
    if total == 0 {
        return Err(CoreError::EmptyInput("target histogram"));
    }
    let mut quotas = BTreeMap::new();
    let mut remainders = Vec::with_capacity(target.joint_counts.len());
    let mut assigned = 0u64;
    for (&cell, &count) in &target.joint_counts {
        let exact = n as u128 * count as u128;
        let q = (exact / total as u128) as u64;
        let r = (exact % total as u128) as u64;
        quotas.insert(cell, q);
        remainders.push((r, cell));
        assigned += q;
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, cell) in remainders.iter().take((n - assigned) as usize) {
        *quotas.get_mut(&cell).expect("cell present") += 1;
    }
    Ok(quotas)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinReport {
    pub word_bin: usize,
    pub char_bin: usize,
    pub word_range: (usize, usize),
    pub char_range: (usize, usize),
    pub target_count: u64,
    pub quota: u64,
    pub available: u64,
    pub filled: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub requested: u64,
    pub seed: u64,
    pub corpus_sentences: u64,
    pub bins: Vec<BinReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedNegatives {
    /// Selected sentences in corpus order.
    pub sentences: Vec<String>,
    pub report: MatchReport,
}

struct Reservoir {
    quota: u64,
    seen: u64,
    kept: Vec<(u64, String)>,
}

/// Single-pass selection of exactly `n` corpus sentences with per-cell counts
/// equal to the largest-remainder quotas of `target`. Within a cell the
/// choice is a seeded uniform sample without replacement (reservoir
/// sampling), so the result depends only on corpus order and seed.
pub fn match_negatives<I, S>(
    corpus: I,
    target: &StatsHistogram,
    n: u64,
    seed: u64,
) -> Result<MatchedNegatives>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if n == 0 {
        return Err(CoreError::InvalidConfig("n must be positive".into()));
    }
    let quotas = bin_quotas(target, n)?;
    let mut reservoirs: BTreeMap<(usize, usize), Reservoir> = quotas
        .iter()
        .filter(|(_, &q)| q > 0)
        .map(|(&cell, &quota)| {
            (
                cell,
                Reservoir {
                    quota,
                    seen: 0,
                    kept: Vec::new(),
                },
            )
        })
        .collect();
    let mut rng = seeded(seed, 0x50);
    let mut corpus_len = 0u64;
    for (index, sentence) in corpus.into_iter().enumerate() {
        corpus_len += 1;
        let sentence = sentence.as_ref();
        let cell = target.cell_of(text_stats(sentence));
        let Some(res) = reservoirs.get_mut(&cell) else {
            continue;
        };
        res.seen += 1;
        if (res.kept.len() as u64) < res.quota {
            res.kept.push((index as u64, String::from(sentence)));
        } else {
            let j = rng.random_range(0..res.seen);
            if j < res.quota {
                res.kept[j as usize] = (index as u64, String::from(sentence));
            }
        }
    }

    let deficits: Vec<BinDeficit> = reservoirs
        .iter()
        .filter(|(_, r)| r.seen < r.quota)
        .map(|(&(w, c), r)| BinDeficit {
            word_bin: w,
            char_bin: c,
            quota: r.quota,
            available: r.seen,
        })
        .collect();
    if !deficits.is_empty() {
        return Err(CoreError::DeficientBins(deficits));
    }

    let bins = quotas
        .iter()
        .map(|(&(w, c), &quota)| {
            let (available, filled) = reservoirs
                .get(&(w, c))
                .map_or((0, 0), |r| (r.seen, r.kept.len() as u64));
            BinReport {
                word_bin: w,
                char_bin: c,
                word_range: target.word_bins.edges(w),
                char_range: target.char_bins.edges(c),
                target_count: target.joint_counts[&(w, c)],
                quota,
                available,
                filled,
            }
        })
        .collect();
    let mut picked: Vec<(u64, String)> = reservoirs.into_values().flat_map(|r| r.kept).collect();
    picked.sort_by_key(|(i, _)| *i);
    Ok(MatchedNegatives {
        sentences: picked.into_iter().map(|(_, s)| s).collect(),
        report: MatchReport {
            requested: n,
            seed,
            corpus_sentences: corpus_len,
            bins,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    #[test]
    fn stats_examples() {
        assert_eq!(
            text_stats("and I woke up exhausted"),
            TextStats {
                word_count: 5,
                char_count: 23
            }
        );
        assert_eq!(
            text_stats(""),
            TextStats {
                word_count: 0,
                char_count: 0
            }
        );
        assert_eq!(
            text_stats("a"),
            TextStats {
                word_count: 1,
                char_count: 1
            }
        );
        assert_eq!(
            text_stats("  héllo  wörld "),
            TextStats {
                word_count: 2,
                char_count: 12
            }
        );
    }

    #[test]
    fn word_binning() {
        let h = build_target_histogram(&["a b c", "a b c", "a b c d e f g"], 5, 100).unwrap();
        assert_eq!(h.word_bins.counts, vec![2, 1]);
        assert_eq!(h.word_bins.edges(1), (5, 10));
        assert!(h.is_consistent());
    }

    #[test]
    fn identical_sentences_single_cell() {
        let h = build_target_histogram(&["same text"; 7], 2, 10).unwrap();
        assert_eq!(h.joint_counts.len(), 1);
        assert_eq!(h.joint_counts.values().next(), Some(&7));
    }

    #[test]
    fn empty_and_bad_width() {
        assert!(build_target_histogram::<&str>(&[], 2, 10).is_err());
        assert!(build_target_histogram(&["x"], 0, 10).is_err());
    }

    #[test]
    fn exact_quota_over_two_bins() {
        let target = build_target_histogram(&["a", "a b c d e"], 2, 100).unwrap();
        let corpus: Vec<String> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    format!("w{i}")
                } else {
                    format!("w{i} x y z q")
                }
            })
            .collect();
        let out = match_negatives(&corpus, &target, 10, 1).unwrap();
        assert_eq!(out.sentences.len(), 10);
        let short = out
            .sentences
            .iter()
            .filter(|s| text_stats(s).word_count == 1)
            .count();
        assert_eq!(short, 5);
    }

    #[test]
    fn deficient_bins_are_listed() {
        let target = build_target_histogram(&["a", "a b c d e"], 2, 100).unwrap();
        let corpus = ["one", "two", "three x y z w"];
        match match_negatives(corpus, &target, 10, 1) {
            Err(CoreError::DeficientBins(d)) => {
                assert_eq!(d.len(), 2);
                assert_eq!(
                    d[0],
                    BinDeficit {
                        word_bin: 0,
                        char_bin: 0,
                        quota: 5,
                        available: 2
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn largest_remainder_sums_to_n() {
        let target =
            build_target_histogram(&["a", "a b c", "a b c d e", "a b c d e"], 2, 100).unwrap();
        let q = bin_quotas(&target, 7).unwrap();
        // exact shares 1.75, 1.75, 3.5 → floors 1,1,3 (sum 5); remainders .75,.75,.5
        assert_eq!(q.values().copied().collect::<Vec<_>>(), vec![2, 2, 3]);
    }
}
