use serde::{Deserialize, Serialize};

use crate::ingest::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    /// Positive class is AD.
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Ad, Label::Ad) => self.tp += 1,
            (Label::Control, Label::Ad) => self.fp += 1,
            (Label::Control, Label::Control) => self.tn += 1,
            (Label::Ad, Label::Control) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentages {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: Confusion,
    /// Fractions in [0, 1].
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Same values as percentages rounded to one decimal.
    pub percent: Percentages,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn pct(v: f64) -> f64 {
    (v * 1000.0).round() / 10.0
}

impl MetricsReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let accuracy = ratio(c.tp + c.tn, c.total());
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = f1_score(precision, recall);
        MetricsReport {
            confusion: c,
            accuracy,
            precision,
            recall,
            f1,
            percent: Percentages {
                accuracy: pct(accuracy),
                precision: pct(precision),
                recall: pct(recall),
                f1: pct(f1),
            },
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Confusion::default();
        for (t, p) in pairs {
            c.record(t, p);
        }
        Self::from_confusion(c)
    }
}
