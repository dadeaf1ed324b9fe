//! Binary confusion matrix, accuracy/precision/recall/F1 and majority-vote
//! aggregation of annotator labels. The positive class is `funny`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: Label, gold: Label) {
        match (predicted, gold) {
            (Label::Funny, Label::Funny) => self.tp += 1,
            (Label::Funny, Label::NotFunny) => self.fp += 1,
            (Label::NotFunny, Label::Funny) => self.fn_ += 1,
            (Label::NotFunny, Label::NotFunny) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = Self::default();
        for (p, g) in pairs {
            m.record(p, g);
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Order-independent sum of two partial matrices.
    pub fn merge(self, other: Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

/// Which ratios had a zero denominator (and were reported as 0).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroDivision {
    pub accuracy: bool,
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl ZeroDivision {
    pub fn any(&self) -> bool {
        self.accuracy || self.precision || self.recall || self.f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: ZeroDivision,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean of precision and recall; `None` when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let s = precision + recall;
    (s > 0.0).then(|| 2.0 * precision * recall / s)
}

pub fn compute_metrics(m: &ConfusionMatrix) -> Metrics {
    let (accuracy, za) = ratio(m.tp + m.tn, m.total());
    let (precision, zp) = ratio(m.tp, m.tp + m.fp);
    let (recall, zr) = ratio(m.tp, m.tp + m.fn_);
    let (f1, zf) = match f1_score(precision, recall) {
        Some(f) => (f, false),
        None => (0.0, true),
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        zero_division: ZeroDivision {
            accuracy: za,
            precision: zp,
            recall: zr,
            f1: zf,
        },
    }
}

/// One model decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Label,
    pub prob_positive: f64,
    /// Both class probabilities were equal; resolved to `not_funny`.
    pub tie: bool,
}

/// Argmax over two-class logits with ties resolved to the negative class.
pub fn decide(logits: [f64; 2]) -> (Label, f64, bool) {
    let max = logits[0].max(logits[1]);
    let e0 = libm::exp(logits[0] - max);
    let e1 = libm::exp(logits[1] - max);
    let p1 = e1 / (e0 + e1);
    let label = if logits[1] > logits[0] {
        Label::Funny
    } else {
        Label::NotFunny
    };
    (label, p1, logits[0] == logits[1])
}

/// Confusion matrix of id-aligned predictions against gold labels.
pub fn confusion(predictions: &[Prediction], gold: &[(String, Label)]) -> Result<ConfusionMatrix> {
    let mut offenders = Vec::new();
    let mut m = ConfusionMatrix::default();
    if predictions.len() != gold.len() {
        let pred_ids: BTreeMap<&str, ()> =
            predictions.iter().map(|p| (p.id.as_str(), ())).collect();
        let gold_ids: BTreeMap<&str, ()> = gold.iter().map(|g| (g.0.as_str(), ())).collect();
        offenders.extend(
            pred_ids
                .keys()
                .filter(|k| !gold_ids.contains_key(*k))
                .map(|k| String::from(*k)),
        );
        offenders.extend(
            gold_ids
                .keys()
                .filter(|k| !pred_ids.contains_key(*k))
                .map(|k| String::from(*k)),
        );
        if offenders.is_empty() {
            offenders.push(alloc::format!(
                "{} predictions vs {} gold labels",
                predictions.len(),
                gold.len()
            ));
        }
        return Err(CoreError::IdMismatch(offenders));
    }
    for (p, (gid, g)) in predictions.iter().zip(gold) {
        if &p.id != gid {
            offenders.push(alloc::format!("{} != {}", p.id, gid));
            continue;
        }
        m.record(p.label, *g);
    }
    if offenders.is_empty() {
        Ok(m)
    } else {
        Err(CoreError::IdMismatch(offenders))
    }
}

/// Per-item binary annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationTable {
    items: BTreeMap<String, Vec<Label>>,
    order: Vec<String>,
}

impl AnnotationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, item_id: &str, label: Label) {
        match self.items.get_mut(item_id) {
            Some(v) => v.push(label),
            None => {
                self.items.insert(String::from(item_id), alloc::vec![label]);
                self.order.push(String::from(item_id));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Items in first-seen order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Label])> {
        self.order
            .iter()
            .map(|id| (id.as_str(), self.items[id].as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub item_id: String,
    pub label: Label,
    pub funny_votes: usize,
    pub not_funny_votes: usize,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityVote {
    pub items: Vec<VoteOutcome>,
    /// Share of items whose majority label is `funny`.
    pub fraction_funny: f64,
    pub ties: usize,
}

pub fn majority_vote(table: &AnnotationTable) -> MajorityVote {
    let items: Vec<VoteOutcome> = table
        .iter()
        .map(|(id, labels)| {
            let funny = labels.iter().filter(|&&l| l == Label::Funny).count();
            let not_funny = labels.len() - funny;
            VoteOutcome {
                item_id: String::from(id),
                label: if funny > not_funny {
                    Label::Funny
                } else {
                    Label::NotFunny
                },
                funny_votes: funny,
                not_funny_votes: not_funny,
                tie: funny == not_funny,
            }
        })
        .collect();
    let funny = items.iter().filter(|o| o.label == Label::Funny).count();
    let fraction_funny = if items.is_empty() {
        0.0
    } else {
        funny as f64 / items.len() as f64
    };
    let ties = items.iter().filter(|o| o.tie).count();
    MajorityVote {
        items,
        fraction_funny,
        ties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pred(id: &str, label: Label) -> Prediction {
        Prediction {
            id: id.into(),
            label,
            prob_positive: 0.5,
            tie: false,
        }
    }

    #[test]
    fn perfect_predictions() {
        let m = ConfusionMatrix {
            tp: 1,
            tn: 1,
            fp: 0,
            fn_: 0,
        };
        let r = compute_metrics(&m);
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert!(!r.zero_division.any());
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let r = compute_metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 5,
        });
        assert_eq!(r.precision, 0.0);
        assert!(r.zero_division.precision && r.zero_division.recall && r.zero_division.f1);
        assert!(!r.zero_division.accuracy);
        assert!(
            compute_metrics(&ConfusionMatrix::default())
                .zero_division
                .accuracy
        );
    }

    #[test]
    fn majority_predictor_on_balanced_set() {
        let m = ConfusionMatrix::from_pairs(
            (0..50)
                .map(|_| (Label::NotFunny, Label::Funny))
                .chain((0..50).map(|_| (Label::NotFunny, Label::NotFunny))),
        );
        assert_eq!(compute_metrics(&m).accuracy, 0.5);
    }

    #[test]
    fn decision_rule() {
        let (l, p, tie) = decide([2.0, -1.0]);
        assert_eq!(l, Label::NotFunny);
        // 1 / (1 + e^3)
        assert!((p - 0.047_425_873_177_566_78).abs() < 1e-12);
        assert!(!tie);
        assert_eq!(decide([0.0, 0.0]), (Label::NotFunny, 0.5, true));
    }

    #[test]
    fn confusion_reports_id_mismatch() {
        let preds = vec![pred("a", Label::Funny), pred("b", Label::NotFunny)];
        let gold = vec![("a".into(), Label::Funny), ("c".into(), Label::NotFunny)];
        assert_eq!(
            confusion(&preds, &gold),
            Err(CoreError::IdMismatch(vec!["b != c".into()]))
        );
        let short = vec![("a".into(), Label::Funny)];
        assert_eq!(
            confusion(&preds, &short),
            Err(CoreError::IdMismatch(vec!["b".into()]))
        );
    }

    #[test]
    fn votes() {
        let mut t = AnnotationTable::new();
        for l in [Label::Funny, Label::Funny, Label::NotFunny] {
            t.add("x", l);
        }
        t.add("y", Label::Funny);
        t.add("y", Label::NotFunny);
        let v = majority_vote(&t);
        assert_eq!(v.items[0].label, Label::Funny);
        assert!(!v.items[0].tie);
        assert_eq!(v.items[1].label, Label::NotFunny);
        assert!(v.items[1].tie);
        assert_eq!(v.fraction_funny, 0.5);
        assert_eq!(v.ties, 1);
    }
}
