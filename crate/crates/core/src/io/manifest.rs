//! Model manifests: a JSON list of convolution layers whose tensors live in
//! sibling files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{FeatureTensor, Tensor, WeightTensor};

use super::{read_json, read_tensor, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    /// `(C_out, C_in, κ, κ)` tensor file.
    pub weight: PathBuf,
    /// `(C_out)` tensor file.
    pub bias: PathBuf,
    pub stride: usize,
    pub padding: usize,
    /// `(C_out, H', W')` or `(N, C_out, H', W')` calibration activations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<PathBuf>,
    /// `[H', W']`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dims: Option<[usize; 2]>,
    /// Planted co-activation groups, recorded by fixture generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    /// `(C_in, H, W)` sample input for the first layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub layers: Vec<LayerEntry>,
}

#[derive(Debug, Clone)]
pub struct LoadedLayer {
    pub name: String,
    pub weights: WeightTensor,
    pub activation: Option<FeatureTensor>,
    pub output_dims: Option<(usize, usize)>,
    pub groups: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub path: PathBuf,
    pub manifest: ModelManifest,
    pub layers: Vec<LoadedLayer>,
    pub input: Option<Tensor>,
}

pub fn write_manifest(path: &Path, manifest: &ModelManifest) -> Result<()> {
    write_json(path, manifest)
}

/// Reads a manifest and every tensor it names. Relative paths resolve
/// against the manifest's directory.
pub fn load_model(path: &Path) -> Result<Model> {
    let manifest: ModelManifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let bad = |msg: String| Error::format(path, msg);
    if manifest.layers.is_empty() {
        return Err(bad("manifest lists no layers".into()));
    }

    let input = match &manifest.input {
        Some(p) => {
            let t = read_tensor(&dir.join(p))?;
            let t = match t.dims() {
                [_, _, _] => t,
                [1, c, h, w] => Tensor::new(vec![*c, *h, *w], t.into_data())?,
                d => return Err(bad(format!("input must be (C, H, W), got {d:?}"))),
            };
            Some(t)
        }
        None => None,
    };

    let mut layers: Vec<LoadedLayer> = Vec::with_capacity(manifest.layers.len());
    let mut hw = input.as_ref().map(|t| (t.dims()[1], t.dims()[2]));
    for (i, e) in manifest.layers.iter().enumerate() {
        let ctx = |msg: String| bad(format!("layer {i} ({}): {msg}", e.name));
        let w = read_tensor(&dir.join(&e.weight))?;
        let b = read_tensor(&dir.join(&e.bias))?;
        if b.dims().len() != 1 {
            return Err(ctx(format!("bias must be 1-D, got {:?}", b.dims())));
        }
        let weights = WeightTensor::new(w, b.into_data(), e.stride, e.padding)
            .map_err(|err| ctx(err.to_string()))?;

        let expected_c_in = match (layers.last(), &input) {
            (Some(prev), _) => Some(prev.weights.c_out()),
            (None, Some(x)) => Some(x.dims()[0]),
            (None, None) => None,
        };
        if let Some(c) = expected_c_in {
            if c != weights.c_in() {
                return Err(ctx(format!("C_in = {} but the previous stage has {c} channels", weights.c_in())));
            }
        }

        if let Some((h, w)) = hw {
            let out = weights.output_hw(h, w).map_err(|err| ctx(err.to_string()))?;
            if let Some([oh, ow]) = e.output_dims {
                if (oh, ow) != out {
                    return Err(ctx(format!("output_dims [{oh}, {ow}] but the chain gives {out:?}")));
                }
            }
            hw = Some(out);
        } else if let Some([oh, ow]) = e.output_dims {
            hw = Some((oh, ow));
        }

        let activation = match &e.activation {
            Some(p) => {
                let f = FeatureTensor::from_batch(read_tensor(&dir.join(p))?).map_err(|err| ctx(err.to_string()))?;
                if f.channels() != weights.c_out() {
                    return Err(ctx(format!("activation has {} channels, C_out = {}", f.channels(), weights.c_out())));
                }
                if let Some((oh, ow)) = hw {
                    if (f.height(), f.width()) != (oh, ow) {
                        return Err(ctx(format!(
                            "activation is {}×{}, output is {oh}×{ow}",
                            f.height(),
                            f.width()
                        )));
                    }
                }
                Some(f)
            }
            None => None,
        };

        layers.push(LoadedLayer {
            name: e.name.clone(),
            weights,
            activation,
            output_dims: hw,
            groups: e.groups.clone(),
        });
    }

    Ok(Model {
        path: path.to_path_buf(),
        manifest,
        layers,
        input,
    })
}
