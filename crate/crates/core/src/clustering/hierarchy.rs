//! Two-level clustering: superpixel regions grouped into spatial clusters by
//! their channel-mean descriptors, then output channels grouped inside each
//! spatial cluster by their activations over that cluster's pixels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans::{kmeans, KMeansConfig};
use crate::clustering::slic::{slic_segment, RegionLabeling, SlicConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::derive_seed;
use crate::tensor::{mean_activation_map, FeatureTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub slic: SlicConfig,
    /// Spatial cluster count `K_s`.
    pub spatial_clusters: usize,
    /// Channel cluster count `L` applied to every spatial cluster.
    pub channel_clusters: usize,
    /// Optional per-spatial-cluster override of `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_clusters_per_region: Option<Vec<usize>>,
    pub seed: u64,
    /// Z-score each channel's activation row before channel clustering.
    #[serde(default)]
    pub normalize_channels: bool,
    pub kmeans_max_iterations: usize,
    pub kmeans_tol: f64,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
}

fn default_restarts() -> usize {
    KMeansConfig::new(1, 0).restarts
}

impl HierarchyConfig {
    pub fn new(superpixels: usize, spatial_clusters: usize, channel_clusters: usize, seed: u64) -> Self {
        Self {
            slic: SlicConfig::new(superpixels),
            spatial_clusters,
            channel_clusters,
            channel_clusters_per_region: None,
            seed,
            normalize_channels: false,
            kmeans_max_iterations: 100,
            kmeans_tol: 1e-6,
            kmeans_restarts: default_restarts(),
        }
    }

    fn channel_clusters_for(&self, k: usize) -> usize {
        self.channel_clusters_per_region
            .as_ref()
            .and_then(|v| v.get(k).copied())
            .unwrap_or(self.channel_clusters)
    }

    fn kmeans(&self, k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            max_iterations: self.kmeans_max_iterations,
            seed,
            restarts: self.kmeans_restarts,
            tol: self.kmeans_tol,
        }
    }
}

/// One channel group `C_ℓ^(k)` inside spatial cluster `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGroup {
    pub spatial_cluster: usize,
    pub channel_cluster: usize,
    /// Ascending output-channel indices.
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub labeling: RegionLabeling,
    /// `C_out × S` region activation means.
    pub descriptors: Matrix,
    /// Region indices of each spatial cluster `G_k`.
    pub spatial: Vec<Vec<usize>>,
    /// Raster pixel indices of each support `Ω_k`, ascending.
    pub supports: Vec<Vec<usize>>,
    /// `channels[k][ℓ]`: ascending channel indices of `C_ℓ^(k)`; may be empty.
    pub channels: Vec<Vec<Vec<usize>>>,
    /// Human-readable notes on clamped cluster counts.
    pub warnings: Vec<String>,
    c_out: usize,
    /// `owner[c]`: the spatial cluster over whose support channel `c` carries
    /// the highest mean squared activation.
    owner: Vec<usize>,
}

impl ClusterModel {
    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn spatial_count(&self) -> usize {
        self.spatial.len()
    }

    /// `(k, ℓ)` of every empty channel cluster.
    pub fn empty_channel_clusters(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, groups) in self.channels.iter().enumerate() {
            for (l, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    out.push((k, l));
                }
            }
        }
        out
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    /// Channel groups used for compression: `C_ℓ^(k)` restricted to the
    /// channels owned by spatial cluster `k`. Together they partition the
    /// output channels; empty groups are dropped. Ordered by `(k, ℓ)`.
    pub fn compression_groups(&self) -> Vec<ChannelGroup> {
        let mut out = Vec::new();
        for (k, groups) in self.channels.iter().enumerate() {
            for (l, g) in groups.iter().enumerate() {
                let channels: Vec<usize> =
                    g.iter().copied().filter(|&c| self.owner[c] == k).collect();
                if !channels.is_empty() {
                    out.push(ChannelGroup {
                        spatial_cluster: k,
                        channel_cluster: l,
                        channels,
                    });
                }
            }
        }
        out
    }

    /// Lists every broken partition invariant (empty when all hold).
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = self.labeling.validate() {
            v.push(format!("region labeling: {e}"));
        }
        if !is_partition(&self.spatial, self.labeling.count()) {
            v.push("spatial clusters do not partition the regions".into());
        }
        if !is_partition(&self.supports, self.labeling.height() * self.labeling.width()) {
            v.push("spatial supports do not partition the pixel grid".into());
        }
        for (k, groups) in self.channels.iter().enumerate() {
            if !is_partition(groups, self.c_out) {
                v.push(format!("channel clusters of spatial cluster {k} do not partition channels"));
            }
        }
        let groups: Vec<Vec<usize>> =
            self.compression_groups().into_iter().map(|g| g.channels).collect();
        if !is_partition(&groups, self.c_out) {
            v.push("compression groups do not partition channels".into());
        }
        v
    }
}

/// True when `sets` are disjoint and cover exactly `0..n`.
pub fn is_partition(sets: &[Vec<usize>], n: usize) -> bool {
    let mut seen = vec![false; n];
    for s in sets {
        for &i in s {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
    }
    seen.into_iter().all(|s| s)
}

/// Region activation vectors stacked as columns: `C_out × S`.
pub fn region_descriptors(f: &FeatureTensor, lab: &RegionLabeling) -> Result<Matrix> {
    if lab.height() != f.height() || lab.width() != f.width() {
        return Err(Error::shape(format!(
            "labeling is {}x{} but features are {}x{}",
            lab.height(),
            lab.width(),
            f.height(),
            f.width()
        )));
    }
    let mut r = Matrix::zeros(f.channels(), lab.count());
    for c in 0..f.channels() {
        let act = f.channel(c);
        for (s, region) in lab.regions().iter().enumerate() {
            let sum: f64 = region.iter().map(|&p| act[p]).sum();
            r[(c, s)] = sum / region.len() as f64;
        }
    }
    Ok(r)
}

pub fn build_cluster_model(f: &FeatureTensor, cfg: &HierarchyConfig) -> Result<ClusterModel> {
    if cfg.spatial_clusters == 0 || cfg.channel_clusters == 0 {
        return Err(Error::param("cluster counts must be at least 1"));
    }
    let c_out = f.channels();
    let mut warnings = Vec::new();

    let map = mean_activation_map(f);
    let labeling = slic_segment(&map, &cfg.slic)?;
    let descriptors = region_descriptors(f, &labeling)?;

    let spatial_fit = kmeans(
        &descriptors.columns(),
        &cfg.kmeans(cfg.spatial_clusters, derive_seed(cfg.seed, 0)),
    )?;
    if spatial_fit.k_clamped {
        warnings.push(format!(
            "spatial clusters reduced from {} to {} (only {} superpixels)",
            cfg.spatial_clusters,
            spatial_fit.k(),
            labeling.count()
        ));
    }
    let spatial = spatial_fit.members();
    let supports: Vec<Vec<usize>> = spatial
        .iter()
        .map(|g| {
            let mut px: Vec<usize> = g.iter().flat_map(|&s| labeling.region(s).iter().copied()).collect();
            px.sort_unstable();
            px
        })
        .collect();

    let fits = supports
        .par_iter()
        .enumerate()
        .map(|(k, omega)| {
            let rows: Vec<Vec<f64>> = (0..c_out)
                .map(|c| {
                    let act = f.channel(c);
                    let row: Vec<f64> = omega.iter().map(|&p| act[p]).collect();
                    if cfg.normalize_channels {
                        zscore(row)
                    } else {
                        row
                    }
                })
                .collect();
            let l = cfg.channel_clusters_for(k);
            kmeans(&rows, &cfg.kmeans(l, derive_seed(cfg.seed, k as u64 + 1)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut channels = Vec::with_capacity(fits.len());
    for (k, fit) in fits.into_iter().enumerate() {
        if fit.k_clamped {
            warnings.push(format!(
                "channel clusters in spatial cluster {k} reduced to {} (C_out = {c_out})",
                fit.k()
            ));
        }
        channels.push(fit.members());
    }

    let owner = (0..c_out)
        .map(|c| {
            let act = f.channel(c);
            let mut best = (0, f64::NEG_INFINITY);
            for (k, omega) in supports.iter().enumerate() {
                if omega.is_empty() {
                    continue;
                }
                let e = omega.iter().map(|&p| act[p] * act[p]).sum::<f64>() / omega.len() as f64;
                if e > best.1 {
                    best = (k, e);
                }
            }
            best.0
        })
        .collect();

    Ok(ClusterModel {
        labeling,
        descriptors,
        spatial,
        supports,
        channels,
        warnings,
        c_out,
        owner,
    })
}

fn zscore(row: Vec<f64>) -> Vec<f64> {
    let n = row.len().max(1) as f64;
    let mean = row.iter().sum::<f64>() / n;
    let sd = (row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return row.into_iter().map(|x| x - mean).collect();
    }
    row.into_iter().map(|x| (x - mean) / sd).collect()
}
