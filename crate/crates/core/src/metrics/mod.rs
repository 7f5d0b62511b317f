//! Efficiency accounting, latency timing, classification scores and
//! bootstrap standard errors.

mod bootstrap;
mod classification;
mod cost;
mod latency;

pub use bootstrap::{bootstrap_se, BootstrapResult, Metric};
pub use classification::{classification_report, format_pm, ClassMetrics, ClassificationReport, PredictionSet};
pub use cost::{cost_report, layer_flops, layer_params, ClusterCost, CostReport, LayerCost};
pub use latency::{measure_latency, Latency};
