//! Markdown result tables: accuracy per text variant, and
//! accuracy/precision/recall/F1 per method.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Variant;
use crate::metrics::Metrics;

const VARIANTS: [Variant; 3] = [Variant::Body, Variant::Punchline, Variant::Full];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("n/a"), |x| format!("{x:.3}"))
}

/// One method's accuracy on each joke variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub method: String,
    pub body: Option<f64>,
    pub punchline: Option<f64>,
    pub full: Option<f64>,
}

impl VariantRow {
    pub fn new(method: &str) -> Self {
        Self {
            method: method.into(),
            body: None,
            punchline: None,
            full: None,
        }
    }

    pub fn set(&mut self, variant: Variant, value: f64) {
        match variant {
            Variant::Body => self.body = Some(value),
            Variant::Punchline => self.punchline = Some(value),
            Variant::Full => self.full = Some(value),
        }
    }

    pub fn get(&self, variant: Variant) -> Option<f64> {
        match variant {
            Variant::Body => self.body,
            Variant::Punchline => self.punchline,
            Variant::Full => self.full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTable {
    pub title: String,
    pub rows: Vec<VariantRow>,
}

impl VariantTable {
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "### {}\n\n| Method | Body | Punchline | Full |\n|---|---|---|---|\n",
            self.title
        );
        for r in &self.rows {
            let cells: Vec<String> = VARIANTS.iter().map(|&v| cell(r.get(v))).collect();
            let _ = writeln!(out, "| {} | {} |", r.method, cells.join(" | "));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub title: String,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "### {}\n\n| Method | Accuracy | Precision | Recall | F1 |\n|---|---|---|---|---|\n",
            self.title
        );
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                r.method, m.accuracy, m.precision, m.recall, m.f1
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, ConfusionMatrix};
    use alloc::vec;

    #[test]
    fn variant_table_layout() {
        let mut row = VariantRow::new("Transformer");
        row.set(Variant::Full, 0.7244);
        let t = VariantTable {
            title: "Accuracy by variant".into(),
            rows: vec![row],
        };
        let md = t.to_markdown();
        assert!(md.contains("| Method | Body | Punchline | Full |"));
        assert!(md.contains("| Transformer | n/a | n/a | 0.724 |"));
    }

    #[test]
    fn metrics_table_layout() {
        let m = compute_metrics(&ConfusionMatrix {
            tp: 3,
            fp: 1,
            fn_: 1,
            tn: 3,
        });
        let t = MetricsTable {
            title: "Transfer".into(),
            rows: vec![MetricsRow {
                method: "CNN+HN".into(),
                metrics: m,
            }],
        };
        assert!(t
            .to_markdown()
            .contains("| CNN+HN | 0.750 | 0.750 | 0.750 | 0.750 |"));
    }
}
