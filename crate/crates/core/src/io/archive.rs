//! Compressed archives: a directory with `manifest.json` and one tensor file
//! per stored factor.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compress::{ClusterFactors, CompressedLayer, LayerFactors, Method};
use crate::error::{Error, Result};
use crate::linalg::{SvdFactors, TuckerFactors};
use crate::matrix::Matrix;
use crate::tensor::Tensor;

use super::{read_json, read_tensor, write_json, write_tensor};

const FORMAT_VERSION: u32 = 1;

/// Settings a compression run was made with. `r_max` absent means no cap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superpixels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Target compression ratio for the baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClusterRecord {
    spatial_cluster: usize,
    channel_cluster: usize,
    channel_indices: Vec<usize>,
    rank: usize,
    u: PathBuf,
    sigma: PathBuf,
    v: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum FactorRecord {
    Clusters { clusters: Vec<ClusterRecord> },
    Tucker { r_out: usize, r_in: usize, core: PathBuf, u1: PathBuf, u2: PathBuf },
    Dense { weight: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    method: Method,
    c_out: usize,
    c_in: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    bias: PathBuf,
    #[serde(flatten)]
    factors: FactorRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArchiveManifest {
    format_version: u32,
    method: Method,
    hyper: Hyper,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchivedLayer {
    pub name: String,
    pub layer: CompressedLayer,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub method: Method,
    pub hyper: Hyper,
    pub layers: Vec<ArchivedLayer>,
}

fn matrix_tensor(m: &Matrix) -> Result<Tensor> {
    Tensor::new(vec![m.rows(), m.cols()], m.data().to_vec())
}

fn put(dir: &Path, name: String, t: &Tensor) -> Result<PathBuf> {
    write_tensor(t, &dir.join(&name))?;
    Ok(PathBuf::from(name))
}

pub fn save_archive(dir: &Path, archive: &Archive) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::with_capacity(archive.layers.len());
    for (li, a) in archive.layers.iter().enumerate() {
        let c = &a.layer;
        let bias = put(dir, format!("l{li}_bias.tnsr"), &Tensor::new(vec![c.c_out], c.bias.clone())?)?;
        let factors = match &c.factors {
            LayerFactors::Clusters(clusters) => {
                let mut records = Vec::with_capacity(clusters.len());
                for (ci, f) in clusters.iter().enumerate() {
                    let stem = format!("l{li}_c{ci}");
                    records.push(ClusterRecord {
                        spatial_cluster: f.spatial_cluster,
                        channel_cluster: f.channel_cluster,
                        channel_indices: f.channel_indices.clone(),
                        rank: f.rank(),
                        u: put(dir, format!("{stem}_u.tnsr"), &matrix_tensor(&f.factors.u)?)?,
                        sigma: put(
                            dir,
                            format!("{stem}_sigma.tnsr"),
                            &Tensor::new(vec![f.rank()], f.factors.sigma.clone())?,
                        )?,
                        v: put(dir, format!("{stem}_v.tnsr"), &matrix_tensor(&f.factors.v)?)?,
                    });
                }
                FactorRecord::Clusters { clusters: records }
            }
            LayerFactors::Tucker(t) => FactorRecord::Tucker {
                r_out: t.r_out(),
                r_in: t.r_in(),
                core: put(dir, format!("l{li}_core.tnsr"), &t.core)?,
                u1: put(dir, format!("l{li}_u1.tnsr"), &matrix_tensor(&t.u1)?)?,
                u2: put(dir, format!("l{li}_u2.tnsr"), &matrix_tensor(&t.u2)?)?,
            },
            LayerFactors::Dense(w) => FactorRecord::Dense {
                weight: put(dir, format!("l{li}_weight.tnsr"), w)?,
            },
        };
        layers.push(LayerRecord {
            name: a.name.clone(),
            method: c.method,
            c_out: c.c_out,
            c_in: c.c_in,
            kernel: c.kernel,
            stride: c.stride,
            padding: c.padding,
            bias,
            factors,
            warnings: a.warnings.clone(),
        });
    }
    write_json(
        &dir.join("manifest.json"),
        &ArchiveManifest {
            format_version: FORMAT_VERSION,
            method: archive.method,
            hyper: archive.hyper.clone(),
            layers,
        },
    )
}

fn get(dir: &Path, file: &Path, dims: &[usize]) -> Result<Tensor> {
    let path = dir.join(file);
    let t = read_tensor(&path)?;
    if t.dims() != dims {
        return Err(Error::format(path, format!("dims {:?}, expected {dims:?}", t.dims())));
    }
    Ok(t)
}

fn get_matrix(dir: &Path, file: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    Matrix::new(rows, cols, get(dir, file, &[rows, cols])?.into_data())
}

pub fn load_archive(dir: &Path) -> Result<Archive> {
    let manifest_path = dir.join("manifest.json");
    let m: ArchiveManifest = read_json(&manifest_path)?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::format(&manifest_path, format!("unsupported format_version {}", m.format_version)));
    }
    let mut layers = Vec::with_capacity(m.layers.len());
    for r in m.layers {
        if r.c_out == 0 || r.c_in == 0 || r.kernel == 0 || r.stride == 0 {
            return Err(Error::format(&manifest_path, format!("layer '{}' has a zero dimension", r.name)));
        }
        let d = r.c_in * r.kernel * r.kernel;
        let factors = match &r.factors {
            FactorRecord::Clusters { clusters } => {
                let mut out = Vec::with_capacity(clusters.len());
                for c in clusters {
                    let n = c.channel_indices.len();
                    out.push(ClusterFactors {
                        spatial_cluster: c.spatial_cluster,
                        channel_cluster: c.channel_cluster,
                        channel_indices: c.channel_indices.clone(),
                        factors: SvdFactors {
                            u: get_matrix(dir, &c.u, n, c.rank)?,
                            sigma: get(dir, &c.sigma, &[c.rank])?.into_data(),
                            v: get_matrix(dir, &c.v, d, c.rank)?,
                        },
                    });
                }
                LayerFactors::Clusters(out)
            }
            FactorRecord::Tucker { r_out, r_in, core, u1, u2 } => LayerFactors::Tucker(TuckerFactors {
                core: get(dir, core, &[*r_out, *r_in, r.kernel, r.kernel])?,
                u1: get_matrix(dir, u1, r.c_out, *r_out)?,
                u2: get_matrix(dir, u2, r.c_in, *r_in)?,
            }),
            FactorRecord::Dense { weight } => {
                LayerFactors::Dense(get(dir, weight, &[r.c_out, r.c_in, r.kernel, r.kernel])?)
            }
        };
        layers.push(ArchivedLayer {
            name: r.name,
            layer: CompressedLayer {
                method: r.method,
                factors,
                bias: get(dir, &r.bias, &[r.c_out])?.into_data(),
                c_out: r.c_out,
                c_in: r.c_in,
                kernel: r.kernel,
                stride: r.stride,
                padding: r.padding,
            },
            warnings: r.warnings,
        });
    }
    Ok(Archive {
        method: m.method,
        hyper: m.hyper,
        layers,
    })
}
