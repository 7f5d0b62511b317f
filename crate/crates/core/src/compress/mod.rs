//! Layer compression: hierarchical spatio-channel SVD, the Global-SVD and
//! Tucker-2 baselines, dense reconstruction and the factored forward pass.

mod budget;
mod forward;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{build_cluster_model, ChannelGroup, ClusterModel, HierarchyConfig};
use crate::error::{Error, Result};
use crate::linalg::{select_rank, svd, RankPolicy, SvdFactors, TuckerFactors};
use crate::matrix::Matrix;
use crate::tensor::{reshape_to_matrix, FeatureTensor, Tensor, WeightTensor};

pub use budget::{compress_tucker2, rank_for_budget, tucker2_choice, BudgetRank, TuckerChoice};
pub use forward::{factored_forward, factored_forward_counted, reconstruct_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hierarchical,
    GlobalSvd,
    Tucker2,
    /// Uncompressed passthrough.
    Dense,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hierarchical => "hierarchical",
            Method::GlobalSvd => "global-svd",
            Method::Tucker2 => "tucker2",
            Method::Dense => "dense",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(Method::Hierarchical),
            "global-svd" => Ok(Method::GlobalSvd),
            "tucker2" => Ok(Method::Tucker2),
            "dense" => Ok(Method::Dense),
            other => Err(Error::param(format!("unknown method '{other}'"))),
        }
    }
}

/// Truncated factors of one channel group.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFactors {
    pub spatial_cluster: usize,
    pub channel_cluster: usize,
    pub channel_indices: Vec<usize>,
    /// `u` is `|C| × r`, `v` is `(C_in·κ²) × r`.
    pub factors: SvdFactors,
}

impl ClusterFactors {
    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn len(&self) -> usize {
        self.channel_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel_indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerFactors {
    Clusters(Vec<ClusterFactors>),
    Tucker(TuckerFactors),
    Dense(Tensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLayer {
    pub method: Method,
    pub factors: LayerFactors,
    pub bias: Vec<f64>,
    pub c_out: usize,
    pub c_in: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl CompressedLayer {
    /// Wraps an uncompressed layer.
    pub fn dense(w: &WeightTensor) -> Self {
        Self::with_factors(w, Method::Dense, LayerFactors::Dense(w.weights().clone()))
    }

    pub(crate) fn with_factors(w: &WeightTensor, method: Method, factors: LayerFactors) -> Self {
        Self {
            method,
            factors,
            bias: w.bias().to_vec(),
            c_out: w.c_out(),
            c_in: w.c_in(),
            kernel: w.kernel(),
            stride: w.stride(),
            padding: w.padding(),
        }
    }

    /// Flattened kernel length `d = C_in·κ²`.
    pub fn row_len(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }

    pub fn clusters(&self) -> &[ClusterFactors] {
        match &self.factors {
            LayerFactors::Clusters(c) => c,
            _ => &[],
        }
    }

    /// Structural problems with the stored factors; empty when consistent.
    /// Orthonormality of singular/Tucker factors is checked to `ortho_tol`.
    pub fn violations(&self, ortho_tol: f64) -> Vec<String> {
        let mut v = Vec::new();
        if self.bias.len() != self.c_out {
            v.push(format!("bias has {} entries, C_out is {}", self.bias.len(), self.c_out));
        }
        let d = self.row_len();
        match &self.factors {
            LayerFactors::Clusters(clusters) => {
                let sets: Vec<Vec<usize>> =
                    clusters.iter().map(|c| c.channel_indices.clone()).collect();
                if !crate::clustering::is_partition(&sets, self.c_out) {
                    v.push("cluster channel indices do not partition the output channels".into());
                }
                if self.method == Method::GlobalSvd && clusters.len() != 1 {
                    v.push(format!("global-svd layer has {} clusters", clusters.len()));
                }
                for (i, c) in clusters.iter().enumerate() {
                    let f = &c.factors;
                    let r = f.rank();
                    if r == 0 || r > c.len().min(d) {
                        v.push(format!("cluster {i}: rank {r} outside 1..={}", c.len().min(d)));
                    }
                    if f.u.shape() != (c.len(), r) || f.v.shape() != (d, r) {
                        v.push(format!(
                            "cluster {i}: factor shapes u {:?}, v {:?} do not match |C|={}, d={d}, r={r}",
                            f.u.shape(),
                            f.v.shape(),
                            c.len()
                        ));
                        continue;
                    }
                    if f.sigma.iter().any(|s| *s < 0.0) || f.sigma.windows(2).any(|w| w[0] < w[1]) {
                        v.push(format!("cluster {i}: singular values not sorted non-negative"));
                    }
                    for (name, m) in [("u", &f.u), ("v", &f.v)] {
                        let dev = orthonormality_error(m);
                        if dev > ortho_tol {
                            v.push(format!("cluster {i}: {name} columns deviate from orthonormal by {dev:.3e}"));
                        }
                    }
                }
            }
            LayerFactors::Tucker(t) => {
                let dims = t.core.dims();
                if t.u1.rows() != self.c_out
                    || t.u2.rows() != self.c_in
                    || dims != [t.u1.cols(), t.u2.cols(), self.kernel, self.kernel]
                {
                    v.push(format!(
                        "tucker shapes core {dims:?}, u1 {:?}, u2 {:?} inconsistent",
                        t.u1.shape(),
                        t.u2.shape()
                    ));
                } else {
                    for (name, m) in [("u1", &t.u1), ("u2", &t.u2)] {
                        let dev = orthonormality_error(m);
                        if dev > ortho_tol {
                            v.push(format!("{name} columns deviate from orthonormal by {dev:.3e}"));
                        }
                    }
                }
            }
            LayerFactors::Dense(t) => {
                if t.dims() != [self.c_out, self.c_in, self.kernel, self.kernel] {
                    v.push(format!("dense weights have dims {:?}", t.dims()));
                }
            }
        }
        v
    }
}

/// `max |QᵀQ − I|`.
pub fn orthonormality_error(q: &Matrix) -> f64 {
    let g = q.t_matmul(q).expect("square gram");
    let mut worst: f64 = 0.0;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// SVD of the stacked kernels of `channels`, truncated to the rank chosen by
/// `rank_of` from the full spectrum.
fn factor_group(
    wmat: &Matrix,
    group: &ChannelGroup,
    rank_of: impl Fn(&[f64]) -> usize,
) -> Result<ClusterFactors> {
    let sub = wmat.select_rows(&group.channels);
    let full = svd(&sub)?;
    let r = rank_of(&full.sigma).clamp(1, full.rank());
    Ok(ClusterFactors {
        spatial_cluster: group.spatial_cluster,
        channel_cluster: group.channel_cluster,
        channel_indices: group.channels.clone(),
        factors: full.truncate(r)?,
    })
}

/// Compresses each channel group with its own energy-selected rank. Output
/// order follows `groups`.
pub fn compress_groups(
    w: &WeightTensor,
    groups: &[ChannelGroup],
    policy: &RankPolicy,
) -> Result<Vec<ClusterFactors>> {
    let wmat = reshape_to_matrix(w);
    groups
        .par_iter()
        .filter(|g| !g.channels.is_empty())
        .map(|g| factor_group(&wmat, g, |sigma| select_rank(sigma, policy)))
        .collect()
}

/// Result of the hierarchical method, with the clustering that drove it.
#[derive(Debug, Clone)]
pub struct HierarchicalCompression {
    pub layer: CompressedLayer,
    pub model: ClusterModel,
}

pub fn compress_hierarchical(
    w: &WeightTensor,
    f: &FeatureTensor,
    cfg: &HierarchyConfig,
    policy: &RankPolicy,
) -> Result<HierarchicalCompression> {
    if f.channels() != w.c_out() {
        return Err(Error::shape(format!(
            "activations have {} channels, layer has C_out = {}",
            f.channels(),
            w.c_out()
        )));
    }
    let model = build_cluster_model(f, cfg)?;
    let clusters = compress_groups(w, &model.compression_groups(), policy)?;
    Ok(HierarchicalCompression {
        layer: CompressedLayer::with_factors(w, Method::Hierarchical, LayerFactors::Clusters(clusters)),
        model,
    })
}

/// One truncated SVD of the whole `C_out × C_in·κ²` matrix.
pub fn compress_global_svd(w: &WeightTensor, r: usize) -> Result<CompressedLayer> {
    let max = w.c_out().min(w.row_len());
    if r == 0 || r > max {
        return Err(Error::param(format!("global-svd rank {r} outside 1..={max}")));
    }
    let group = ChannelGroup {
        spatial_cluster: 0,
        channel_cluster: 0,
        channels: (0..w.c_out()).collect(),
    };
    let cluster = factor_group(&reshape_to_matrix(w), &group, |_| r)?;
    Ok(CompressedLayer::with_factors(
        w,
        Method::GlobalSvd,
        LayerFactors::Clusters(vec![cluster]),
    ))
}

pub(crate) fn tucker_layer(w: &WeightTensor, t: TuckerFactors) -> CompressedLayer {
    CompressedLayer::with_factors(w, Method::Tucker2, LayerFactors::Tucker(t))
}
