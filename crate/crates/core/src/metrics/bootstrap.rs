//! Nonparametric bootstrap standard error of a classification metric.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::classification::{classification_report, ClassificationReport, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    MacroPrecision,
    MacroRecall,
    MacroF1,
    WeightedF1,
}

impl Metric {
    pub fn of(&self, r: &ClassificationReport) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::MacroPrecision => r.macro_precision,
            Metric::MacroRecall => r.macro_recall,
            Metric::MacroF1 => r.macro_f1,
            Metric::WeightedF1 => r.weighted_f1,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "accuracy" => Metric::Accuracy,
            "macro-precision" => Metric::MacroPrecision,
            "macro-recall" => Metric::MacroRecall,
            "macro-f1" => Metric::MacroF1,
            "weighted-f1" => Metric::WeightedF1,
            other => return Err(Error::param(format!("unknown metric '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub metric: Metric,
    pub b: usize,
    pub seed: u64,
    /// Metric on the full set.
    pub theta_hat: f64,
    /// Mean over replicates.
    pub bar_theta: f64,
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<f64>>,
}

/// Replicate `b` draws `N` indices with replacement from its own ChaCha8
/// stream, so the result does not depend on thread scheduling.
pub fn bootstrap_se(
    p: &PredictionSet,
    metric: Metric,
    b: usize,
    seed: u64,
    keep_replicates: bool,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::param(format!("bootstrap needs B ≥ 2, got {b}")));
    }
    let n = p.len();
    let replicates: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::rng(rng::derive_seed(seed, i as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            metric.of(&classification_report(&p.resample(&idx)))
        })
        .collect();
    let bar_theta = replicates.iter().sum::<f64>() / b as f64;
    let var = replicates.iter().map(|t| (t - bar_theta).powi(2)).sum::<f64>() / (b - 1) as f64;
    Ok(BootstrapResult {
        metric,
        b,
        seed,
        theta_hat: metric.of(&classification_report(p)),
        bar_theta,
        se: var.sqrt(),
        replicates: keep_replicates.then_some(replicates),
    })
}
