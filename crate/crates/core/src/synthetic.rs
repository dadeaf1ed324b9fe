//! Seeded synthetic datasets for exercising the training pipeline.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Label, LabeledExample, Variant};
use crate::rng::seeded;

pub const MARKER_COUNT: usize = 20;
pub const FILLER_COUNT: usize = 200;

pub fn marker_token(i: usize) -> String {
    format!("pun{i}")
}

fn filler_token(i: usize) -> String {
    format!("w{i}")
}

/// `n` sentences of 6 to 16 filler words, half of them positive. A positive
/// sentence carries exactly one of the marker tokens at a random position.
/// Examples are shuffled; ids are `pm-<index>`.
pub fn pun_marker_dataset(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = seeded(seed, 0x90);
    let mut out: Vec<LabeledExample> = (0..n)
        .map(|i| {
            let len = rng.random_range(6..=16usize);
            let mut words: Vec<String> = (0..len)
                .map(|_| filler_token(rng.random_range(0..FILLER_COUNT)))
                .collect();
            let label = if i % 2 == 0 {
                Label::Funny
            } else {
                Label::NotFunny
            };
            if label == Label::Funny {
                let at = rng.random_range(0..len);
                words[at] = marker_token(rng.random_range(0..MARKER_COUNT));
            }
            (label, words.join(" "))
        })
        .enumerate()
        .map(|(i, (label, text))| LabeledExample {
            id: format!("pm-{i:05}"),
            text,
            label,
            variant: Variant::Full,
        })
        .collect();
    out.shuffle(&mut rng);
    out
}

/// `n` examples whose classes use disjoint word sets (`pos*` vs `neg*`).
pub fn separable_toy(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = seeded(seed, 0xa0);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 {
                Label::Funny
            } else {
                Label::NotFunny
            };
            let prefix = if label == Label::Funny { "pos" } else { "neg" };
            let len = rng.random_range(4..=8usize);
            let words: Vec<String> = (0..len)
                .map(|_| format!("{prefix}{}", rng.random_range(0..8usize)))
                .collect();
            LabeledExample {
                id: format!("toy-{i:03}"),
                text: words.join(" "),
                label,
                variant: Variant::Full,
            }
        })
        .collect()
}
