//! Per-class precision, recall and F1 with macro and weighted averages.

use serde::Serialize;

use crate::error::{Error, Result};

/// Paired true and predicted labels in `0..classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    truth: Vec<usize>,
    pred: Vec<usize>,
    classes: usize,
}

impl PredictionSet {
    pub fn new(truth: Vec<usize>, pred: Vec<usize>, classes: usize) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::Data("prediction set is empty".into()));
        }
        if truth.len() != pred.len() {
            return Err(Error::Data(format!(
                "{} true labels but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        if let Some(i) = truth.iter().chain(&pred).position(|&l| l >= classes) {
            let i = i % truth.len();
            return Err(Error::Data(format!(
                "sample {i}: label ({}, {}) outside 0..{classes}",
                truth[i], pred[i]
            )));
        }
        Ok(Self { truth, pred, classes })
    }

    /// Class count inferred as one past the largest label.
    pub fn inferred(truth: Vec<usize>, pred: Vec<usize>) -> Result<Self> {
        let classes = truth.iter().chain(&pred).max().map_or(0, |m| m + 1);
        Self::new(truth, pred, classes)
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn truth(&self) -> &[usize] {
        &self.truth
    }

    pub fn pred(&self) -> &[usize] {
        &self.pred
    }

    /// Subset at the given sample indices, repeats allowed.
    pub fn resample(&self, idx: &[usize]) -> PredictionSet {
        PredictionSet {
            truth: idx.iter().map(|&i| self.truth[i]).collect(),
            pred: idx.iter().map(|&i| self.pred[i]).collect(),
            classes: self.classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub samples: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

fn safe_div(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn classification_report(p: &PredictionSet) -> ClassificationReport {
    let k = p.classes;
    let (mut tp, mut fp, mut fn_) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (&t, &y) in p.truth.iter().zip(&p.pred) {
        if t == y {
            tp[t] += 1;
        } else {
            fp[y] += 1;
            fn_[t] += 1;
        }
    }
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let (precision, dp) = safe_div(tp[c] as f64, (tp[c] + fp[c]) as f64);
            let (recall, dr) = safe_div(tp[c] as f64, (tp[c] + fn_[c]) as f64);
            let (f1, df) = safe_div(2.0 * precision * recall, precision + recall);
            ClassMetrics {
                class: c,
                tp: tp[c],
                fp: fp[c],
                fn_: fn_[c],
                support: tp[c] + fn_[c],
                precision,
                recall,
                f1,
                degenerate: dp || dr || df,
            }
        })
        .collect();

    let n = p.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / n
    };
    ClassificationReport {
        samples: p.len(),
        accuracy: tp.iter().sum::<usize>() as f64 / n,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
        per_class,
    }
}

/// Percentage with its standard error, e.g. `87.76 ± 1.52`.
pub fn format_pm(value: f64, se: f64) -> String {
    format!("{:.2} ± {:.2}", value * 100.0, se * 100.0)
}
