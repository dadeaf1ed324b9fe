//! Threshold labelling, text variants, stratified splits and class
//! rebalancing.
//!
//! Every sampling step is a pure function of its input order and seed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::record::JokeRecord;
use crate::rng::seeded;

const STREAM_TRAIN_SPLIT: u64 = 0x10;
const STREAM_HOLDOUT_SPLIT: u64 = 0x20;
const STREAM_UPSAMPLE: u64 = 0x30;
const STREAM_DOWNSAMPLE: u64 = 0x40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    NotFunny = 0,
    Funny = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::NotFunny),
            1 => Some(Label::Funny),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Label::NotFunny => "not_funny",
            Label::Funny => "funny",
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> core::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Body,
    Punchline,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Body, Variant::Punchline, Variant::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Body => "body",
            Variant::Punchline => "punchline",
            Variant::Full => "full",
        }
    }

    pub fn text_of(self, record: &JokeRecord) -> String {
        match self {
            Variant::Body => record.body.trim().to_string(),
            Variant::Punchline => record.punchline.trim().to_string(),
            Variant::Full => record.full_text(),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s {
            "body" => Ok(Variant::Body),
            "punchline" => Ok(Variant::Punchline),
            "full" => Ok(Variant::Full),
            other => Err(format!(
                "unknown variant `{other}` (expected body, punchline or full)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub variant: Variant,
}

/// Exact non-negative fraction `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(CoreError::InvalidConfig("ratio denominator is zero".into()));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    /// `⌊n · self⌋`.
    pub fn floor_mul(self, n: usize) -> usize {
        ((n as u128 * self.num as u128) / self.den as u128) as usize
    }

    pub fn is_proper_nonzero(self) -> bool {
        self.num > 0 && self.num < self.den
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Ratio {
    type Err = CoreError;

    /// Accepts `a/b` or a plain decimal such as `0.75`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || CoreError::InvalidConfig(format!("cannot parse ratio `{s}`"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Ratio::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_v: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Ratio::new(num, den)
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Ratio;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a fraction like \"3/4\" or a decimal like 0.75")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<Ratio, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> core::result::Result<Ratio, E> {
                format!("{v}").parse().map_err(E::custom)
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<Ratio, E> {
                Ratio::new(v, 1).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<Ratio, E> {
                let v = u64::try_from(v).map_err(|_| E::custom("ratio must be non-negative"))?;
                Ratio::new(v, 1).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub score_threshold: u64,
    pub train_fraction: Ratio,
    pub seed: u64,
    pub holdout_validation_fraction: Ratio,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            score_threshold: 200,
            train_fraction: Ratio { num: 3, den: 4 },
            seed: 0,
            holdout_validation_fraction: Ratio { num: 1, den: 2 },
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.train_fraction.is_proper_nonzero() {
            return Err(CoreError::InvalidConfig(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if !self.holdout_validation_fraction.is_proper_nonzero() {
            return Err(CoreError::InvalidConfig(format!(
                "holdout_validation_fraction must lie strictly between 0 and 1, got {}",
                self.holdout_validation_fraction
            )));
        }
        Ok(())
    }

    pub fn label_for(&self, score: u64) -> Label {
        if score >= self.score_threshold {
            Label::Funny
        } else {
            Label::NotFunny
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub funny: usize,
    pub not_funny: usize,
}

impl ClassCounts {
    pub fn of(examples: &[LabeledExample]) -> Self {
        let funny = examples.iter().filter(|e| e.label == Label::Funny).count();
        Self {
            funny,
            not_funny: examples.len() - funny,
        }
    }

    pub fn total(&self) -> usize {
        self.funny + self.not_funny
    }

    pub fn is_balanced(&self) -> bool {
        self.funny == self.not_funny
    }
}

/// Labels every record (full variant): funny iff `score >= score_threshold`.
pub fn label_by_threshold(records: &[JokeRecord], config: &CorpusConfig) -> Vec<LabeledExample> {
    records
        .iter()
        .map(|r| LabeledExample {
            id: r.id.clone(),
            text: r.full_text(),
            label: config.label_for(r.score),
            variant: Variant::Full,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub body: usize,
    pub punchline: usize,
    pub full: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantDatasets {
    pub body: Vec<LabeledExample>,
    pub punchline: Vec<LabeledExample>,
    pub full: Vec<LabeledExample>,
    pub dropped: DropCounts,
}

impl VariantDatasets {
    pub fn get(&self, v: Variant) -> &[LabeledExample] {
        match v {
            Variant::Body => &self.body,
            Variant::Punchline => &self.punchline,
            Variant::Full => &self.full,
        }
    }
}

/// Body-only, punchline-only and combined datasets sharing ids and labels.
/// Records whose variant text is empty are dropped from that variant only.
pub fn make_variants(records: &[JokeRecord], config: &CorpusConfig) -> VariantDatasets {
    let mut out = VariantDatasets {
        body: Vec::new(),
        punchline: Vec::new(),
        full: Vec::new(),
        dropped: DropCounts::default(),
    };
    for r in records {
        let label = config.label_for(r.score);
        for variant in Variant::ALL {
            let text = variant.text_of(r);
            let (dst, drops) = match variant {
                Variant::Body => (&mut out.body, &mut out.dropped.body),
                Variant::Punchline => (&mut out.punchline, &mut out.dropped.punchline),
                Variant::Full => (&mut out.full, &mut out.dropped.full),
            };
            if text.is_empty() {
                *drops += 1;
            } else {
                dst.push(LabeledExample {
                    id: r.id.clone(),
                    text,
                    label,
                    variant,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub first: Vec<LabeledExample>,
    pub second: Vec<LabeledExample>,
}

fn class_indices(examples: &[LabeledExample]) -> Result<[Vec<usize>; 2]> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, e) in examples.iter().enumerate() {
        by_class[e.label.index()].push(i);
    }
    for label in [Label::Funny, Label::NotFunny] {
        if by_class[label.index()].is_empty() {
            return Err(CoreError::MissingClass(label.name()));
        }
    }
    Ok(by_class)
}

fn stratified(
    examples: &[LabeledExample],
    fraction: Ratio,
    seed: u64,
    stream: u64,
) -> Result<Split> {
    let by_class = class_indices(examples)?;
    let mut in_first = alloc::vec![false; examples.len()];
    for (class, indices) in by_class.iter().enumerate() {
        let mut shuffled = indices.clone();
        let mut rng = seeded(seed, stream + class as u64);
        shuffled.shuffle(&mut rng);
        let k = fraction.floor_mul(shuffled.len());
        for &i in &shuffled[..k] {
            in_first[i] = true;
        }
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (e, &f) in examples.iter().zip(&in_first) {
        if f {
            first.push(e.clone());
        } else {
            second.push(e.clone());
        }
    }
    Ok(Split { first, second })
}

/// Per class, `⌊train_fraction · n_class⌋` examples go to train after a seeded
/// shuffle of that class. Both outputs keep input order.
pub fn stratified_split(examples: &[LabeledExample], config: &CorpusConfig) -> Result<Split> {
    config.validate()?;
    stratified(
        examples,
        config.train_fraction,
        config.seed,
        STREAM_TRAIN_SPLIT,
    )
}

/// Splits a balanced holdout into `(validation, test)` by
/// `holdout_validation_fraction`, stratified and floor-rounded.
pub fn split_holdout(holdout: &[LabeledExample], config: &CorpusConfig) -> Result<Split> {
    config.validate()?;
    stratified(
        holdout,
        config.holdout_validation_fraction,
        config.seed,
        STREAM_HOLDOUT_SPLIT,
    )
}

fn minority_majority(examples: &[LabeledExample]) -> Result<(Label, Label, ClassCounts)> {
    class_indices(examples)?;
    let counts = ClassCounts::of(examples);
    Ok(if counts.funny <= counts.not_funny {
        (Label::Funny, Label::NotFunny, counts)
    } else {
        (Label::NotFunny, Label::Funny, counts)
    })
}

/// Appends seeded with-replacement draws of minority examples until both
/// classes have the same count. Original examples keep their positions.
pub fn upsample_minority(train: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>> {
    let (minority, _, counts) = minority_majority(train)?;
    if counts.is_balanced() {
        return Ok(train.to_vec());
    }
    let pool: Vec<&LabeledExample> = train.iter().filter(|e| e.label == minority).collect();
    let deficit = counts.funny.abs_diff(counts.not_funny);
    let mut rng = seeded(seed, STREAM_UPSAMPLE);
    let mut out = train.to_vec();
    out.reserve(deficit);
    for _ in 0..deficit {
        out.push(pool[rng.random_range(0..pool.len())].clone());
    }
    Ok(out)
}

/// Keeps every minority example and a seeded without-replacement subset of
/// the majority of the same size, in input order.
pub fn downsample_balanced(holdout: &[LabeledExample], seed: u64) -> Result<Vec<LabeledExample>> {
    let (_, majority, counts) = minority_majority(holdout)?;
    if counts.is_balanced() {
        return Ok(holdout.to_vec());
    }
    let keep_n = counts.funny.min(counts.not_funny);
    let mut majority_idx: Vec<usize> = holdout
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == majority)
        .map(|(i, _)| i)
        .collect();
    let mut rng = seeded(seed, STREAM_DOWNSAMPLE);
    majority_idx.shuffle(&mut rng);
    let mut keep = alloc::vec![true; holdout.len()];
    for &i in &majority_idx[keep_n..] {
        keep[i] = false;
    }
    Ok(holdout
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(e, _)| e.clone())
        .collect())
}

/// All artefacts of the dataset-construction workflow for one variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetBundle {
    pub variant: Variant,
    pub labeled: Vec<LabeledExample>,
    pub train: Vec<LabeledExample>,
    pub train_balanced: Vec<LabeledExample>,
    pub holdout: Vec<LabeledExample>,
    pub holdout_balanced: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub labeled: ClassCounts,
    pub train: ClassCounts,
    pub train_balanced: ClassCounts,
    pub holdout: ClassCounts,
    pub holdout_balanced: ClassCounts,
    pub validation: ClassCounts,
    pub test: ClassCounts,
}

impl DatasetBundle {
    /// stratified split → upsample train → downsample holdout → split holdout.
    pub fn build(
        variant: Variant,
        labeled: Vec<LabeledExample>,
        config: &CorpusConfig,
    ) -> Result<Self> {
        let split = stratified_split(&labeled, config)?;
        let train_balanced = upsample_minority(&split.first, config.seed)?;
        let holdout_balanced = downsample_balanced(&split.second, config.seed)?;
        let eval = split_holdout(&holdout_balanced, config)?;
        Ok(Self {
            variant,
            labeled,
            train: split.first,
            train_balanced,
            holdout: split.second,
            holdout_balanced,
            validation: eval.first,
            test: eval.second,
        })
    }

    pub fn summary(&self) -> BundleSummary {
        BundleSummary {
            labeled: ClassCounts::of(&self.labeled),
            train: ClassCounts::of(&self.train),
            train_balanced: ClassCounts::of(&self.train_balanced),
            holdout: ClassCounts::of(&self.holdout),
            holdout_balanced: ClassCounts::of(&self.holdout_balanced),
            validation: ClassCounts::of(&self.validation),
            test: ClassCounts::of(&self.test),
        }
    }
}
