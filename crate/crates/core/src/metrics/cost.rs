//! Parameter, compression-ratio and multiply-accumulate accounting.

use serde::Serialize;

use crate::compress::{CompressedLayer, LayerFactors, Method};
use crate::error::{Error, Result};
use crate::linalg::tucker2_params;
use crate::tensor::WeightTensor;

use super::Latency;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCost {
    pub spatial_cluster: usize,
    pub channel_cluster: usize,
    pub channels: usize,
    pub rank: usize,
    /// `n·d` for the channels of this cluster.
    pub p_orig: u64,
    /// `r·(n + d)`.
    pub p_comp: u64,
    pub cr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCost {
    pub method: Method,
    pub p_orig: u64,
    pub p_comp: u64,
    pub cr_layer: f64,
    pub delta_p_pct: f64,
    pub output_hw: (usize, usize),
    pub flops_orig: u64,
    pub flops_comp: u64,
    pub flops_ratio: f64,
    pub delta_flops_pct: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<ClusterCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub p_orig: u64,
    pub p_comp: u64,
    /// `Σ p_orig / Σ p_comp` over layers.
    pub cr_model: f64,
    pub delta_p_pct: f64,
    pub flops_orig: u64,
    pub flops_comp: u64,
    pub flops_ratio: f64,
    pub delta_flops_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<Latency>,
}

fn ratio(orig: u64, comp: u64) -> f64 {
    orig as f64 / comp as f64
}

fn reduction_pct(orig: u64, comp: u64) -> f64 {
    (1.0 - comp as f64 / orig as f64) * 100.0
}

/// Stored parameter count of a compressed layer, bias excluded.
pub fn layer_params(c: &CompressedLayer) -> u64 {
    let d = c.row_len();
    match &c.factors {
        LayerFactors::Clusters(cl) => cl.iter().map(|f| (f.rank() * (f.len() + d)) as u64).sum(),
        LayerFactors::Tucker(t) => tucker2_params(c.c_out, c.c_in, c.kernel, t.r_out(), t.r_in()),
        LayerFactors::Dense(_) => (c.c_out * d) as u64,
    }
}

/// Multiply-accumulates of the factored form at output size `H' × W'`.
/// The Tucker input projection is counted at output resolution, which equals
/// the executed count whenever the convolution preserves spatial size.
pub fn layer_flops(c: &CompressedLayer, (oh, ow): (usize, usize)) -> u64 {
    let d = c.row_len();
    let per_position: u64 = match &c.factors {
        LayerFactors::Clusters(cl) => cl.iter().map(|f| (f.rank() * d + f.len() * f.rank()) as u64).sum(),
        LayerFactors::Tucker(_) | LayerFactors::Dense(_) => layer_params(c),
    };
    (oh * ow) as u64 * per_position
}

fn layer_cost(w: &WeightTensor, c: &CompressedLayer, hw: (usize, usize)) -> Result<LayerCost> {
    if (w.c_out(), w.c_in(), w.kernel()) != (c.c_out, c.c_in, c.kernel) {
        return Err(Error::shape(format!(
            "original layer ({}, {}, {}) does not match compressed ({}, {}, {})",
            w.c_out(),
            w.c_in(),
            w.kernel(),
            c.c_out,
            c.c_in,
            c.kernel
        )));
    }
    let d = c.row_len();
    let p_orig = (c.c_out * d) as u64;
    let p_comp = layer_params(c);
    let flops_orig = (hw.0 * hw.1) as u64 * p_orig;
    let flops_comp = layer_flops(c, hw);
    let clusters = c
        .clusters()
        .iter()
        .map(|f| {
            let p_orig = (f.len() * d) as u64;
            let p_comp = (f.rank() * (f.len() + d)) as u64;
            ClusterCost {
                spatial_cluster: f.spatial_cluster,
                channel_cluster: f.channel_cluster,
                channels: f.len(),
                rank: f.rank(),
                p_orig,
                p_comp,
                cr: ratio(p_orig, p_comp),
            }
        })
        .collect();
    Ok(LayerCost {
        method: c.method,
        p_orig,
        p_comp,
        cr_layer: ratio(p_orig, p_comp),
        delta_p_pct: reduction_pct(p_orig, p_comp),
        output_hw: hw,
        flops_orig,
        flops_comp,
        flops_ratio: ratio(flops_orig, flops_comp),
        delta_flops_pct: reduction_pct(flops_orig, flops_comp),
        clusters,
    })
}

pub fn cost_report(
    original: &[WeightTensor],
    compressed: &[CompressedLayer],
    output_hw: &[(usize, usize)],
    latency: Option<Latency>,
) -> Result<CostReport> {
    if original.is_empty() {
        return Err(Error::param("cost report needs at least one layer"));
    }
    if original.len() != compressed.len() || original.len() != output_hw.len() {
        return Err(Error::param(format!(
            "{} original layers, {} compressed, {} output sizes",
            original.len(),
            compressed.len(),
            output_hw.len()
        )));
    }
    let layers = original
        .iter()
        .zip(compressed)
        .zip(output_hw)
        .map(|((w, c), &hw)| layer_cost(w, c, hw))
        .collect::<Result<Vec<_>>>()?;
    let p_orig = layers.iter().map(|l| l.p_orig).sum();
    let p_comp = layers.iter().map(|l| l.p_comp).sum();
    let flops_orig = layers.iter().map(|l| l.flops_orig).sum();
    let flops_comp = layers.iter().map(|l| l.flops_comp).sum();
    Ok(CostReport {
        layers,
        p_orig,
        p_comp,
        cr_model: ratio(p_orig, p_comp),
        delta_p_pct: reduction_pct(p_orig, p_comp),
        flops_orig,
        flops_comp,
        flops_ratio: ratio(flops_orig, flops_comp),
        delta_flops_pct: reduction_pct(flops_orig, flops_comp),
        latency,
    })
}
