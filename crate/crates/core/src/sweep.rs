//! Hyper-parameter sweep of the hierarchical method with Pareto marking.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::clustering::{build_cluster_model, ClusterModel, HierarchyConfig};
use crate::compress::{compress_groups, reconstruct_weights, CompressedLayer, LayerFactors, Method};
use crate::error::{Error, Result};
use crate::linalg::RankPolicy;
use crate::metrics::{layer_flops, layer_params};
use crate::rng::derive_seed;
use crate::tensor::{FeatureTensor, WeightTensor};

/// Relative errors below this are reported as exactly zero so lossless
/// configurations compare equal.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub spatial_clusters: Vec<usize>,
    pub channel_clusters: Vec<usize>,
    pub taus: Vec<f64>,
    /// `None` leaves the rank uncapped.
    pub r_max: Vec<Option<usize>>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.spatial_clusters.len() * self.channel_clusters.len() * self.taus.len() * self.r_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configurations in grid order: `K_s` slowest, `r_max` fastest.
    pub fn points(&self) -> Vec<(usize, usize, f64, Option<usize>)> {
        let mut out = Vec::with_capacity(self.len());
        for &ks in &self.spatial_clusters {
            for &l in &self.channel_clusters {
                for &tau in &self.taus {
                    for &r in &self.r_max {
                        out.push((ks, l, tau, r));
                    }
                }
            }
        }
        out
    }
}

/// One compressible layer with its calibration activations and output size.
#[derive(Debug, Clone)]
pub struct SweepLayer {
    pub weights: WeightTensor,
    pub activation: FeatureTensor,
    pub output_hw: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub spatial_clusters: usize,
    pub channel_clusters: usize,
    pub tau: f64,
    pub r_max: Option<usize>,
    /// `‖W − Ŵ‖_F / ‖W‖_F` over all layers jointly.
    pub error: f64,
    pub p_comp: u64,
    pub flops_comp: u64,
    pub pareto: bool,
}

/// Rows not dominated in (error, FLOPs): no other row is at least as good on
/// both and strictly better on one.
pub fn pareto_flags(points: &[(f64, u64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(e, f)| {
            !points
                .iter()
                .any(|&(e2, f2)| e2 <= e && f2 <= f && (e2 < e || f2 < f))
        })
        .collect()
}

pub fn run_sweep(
    layers: &[SweepLayer],
    grid: &SweepGrid,
    superpixels: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    if layers.is_empty() {
        return Err(Error::param("sweep needs at least one layer"));
    }
    let policies = grid
        .taus
        .iter()
        .flat_map(|&t| grid.r_max.iter().map(move |&r| (t, r)))
        .map(|(t, r)| match r {
            Some(r) => RankPolicy::new(t, r),
            None => RankPolicy::uncapped(t),
        })
        .collect::<Result<Vec<_>>>()?;

    // Clusterings depend only on (K_s, L); each layer keeps its own seed so
    // every configuration sees the same segmentation.
    let cluster_keys: Vec<(usize, usize)> = grid
        .spatial_clusters
        .iter()
        .flat_map(|&k| grid.channel_clusters.iter().map(move |&l| (k, l)))
        .collect();
    let models: Vec<Vec<ClusterModel>> = cluster_keys
        .par_iter()
        .map(|&(ks, l)| {
            layers
                .iter()
                .enumerate()
                .map(|(i, layer)| {
                    let cfg = HierarchyConfig::new(superpixels, ks, l, derive_seed(seed, i as u64));
                    build_cluster_model(&layer.activation, &cfg)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let total_sq: f64 = layers.iter().map(|l| l.weights.weights().frobenius_norm().powi(2)).sum();
    let points = grid.points();
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(ks, l, tau, r_max))| {
            let models = &models[i / policies.len()];
            let policy = &policies[i % policies.len()];
            let (mut err_sq, mut p_comp, mut flops_comp) = (0.0, 0u64, 0u64);
            for (layer, model) in layers.iter().zip(models) {
                let w = &layer.weights;
                let clusters = compress_groups(w, &model.compression_groups(), policy)?;
                let c = CompressedLayer::with_factors(w, Method::Hierarchical, LayerFactors::Clusters(clusters));
                err_sq += w.weights().diff_norm(reconstruct_weights(&c)?.weights()).powi(2);
                p_comp += layer_params(&c);
                flops_comp += layer_flops(&c, layer.output_hw);
            }
            let mut error = if total_sq > 0.0 { (err_sq / total_sq).sqrt() } else { 0.0 };
            if error < ERROR_FLOOR {
                error = 0.0;
            }
            Ok(SweepRow {
                spatial_clusters: ks,
                channel_clusters: l,
                tau,
                r_max,
                error,
                p_comp,
                flops_comp,
                pareto: false,
            })
        })
        .collect::<Result<_>>()?;

    let flags = pareto_flags(&rows.iter().map(|r| (r.error, r.flops_comp)).collect::<Vec<_>>());
    for (r, f) in rows.iter_mut().zip(flags) {
        r.pareto = f;
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let io_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(["spatial_clusters", "channel_clusters", "tau", "r_max", "error", "p_comp", "flops_comp", "pareto"])
        .map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.spatial_clusters.to_string(),
            r.channel_clusters.to_string(),
            r.tau.to_string(),
            r.r_max.map_or_else(|| "inf".to_string(), |v| v.to_string()),
            format!("{:e}", r.error),
            r.p_comp.to_string(),
            r.flops_comp.to_string(),
            r.pareto.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
