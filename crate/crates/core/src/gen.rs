//! Synthetic model fixtures: random or planted-rank weights, chained ReLU
//! activations, and optional exact co-activation groups.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::conv::conv2d_forward;
use crate::error::{Error, Result};
use crate::io::{write_manifest, write_tensor, LayerEntry, ModelManifest};
use crate::rng;
use crate::tensor::{conv_output_hw, Tensor, WeightTensor};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenConfig {
    /// Channel counts along the chain, input first; `n + 1` entries for `n` layers.
    pub channels: Vec<usize>,
    pub kernel: usize,
    /// Input height and width.
    pub size: usize,
    pub stride: usize,
    /// Defaults to `κ / 2`.
    pub padding: Option<usize>,
    /// Calibration samples.
    pub batch: usize,
    pub seed: u64,
    pub planted_rank: Option<usize>,
    pub groups: Option<usize>,
}

impl GenConfig {
    pub fn new(channels: Vec<usize>, seed: u64) -> Self {
        Self {
            channels,
            kernel: 3,
            size: 16,
            stride: 1,
            padding: None,
            batch: 2,
            seed,
            planted_rank: None,
            groups: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::param("need at least two channel counts (input and one layer)"));
        }
        if self.channels.contains(&0) {
            return Err(Error::param("channel counts must be positive"));
        }
        if self.kernel == 0 || self.size == 0 || self.stride == 0 || self.batch == 0 {
            return Err(Error::param("kernel, size, stride and batch must be positive"));
        }
        if let Some(g) = self.groups {
            let min = self.channels[1..].iter().min().copied().unwrap_or(0);
            if g == 0 || g > min {
                return Err(Error::param(format!("groups {g} outside 1..={min}")));
            }
        }
        if let Some(r) = self.planted_rank {
            for w in self.channels.windows(2) {
                let max = w[1].min(w[0] * self.kernel * self.kernel);
                if r == 0 || r > max {
                    return Err(Error::param(format!("planted rank {r} outside 1..={max}")));
                }
            }
        }
        Ok(())
    }
}

/// Normal sample rounded to a multiple of 1/64, exact in f32.
fn dyadic(rng: &mut impl Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (z * 64.0).round() / 64.0
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Nearest power of two to `x`.
fn pow2_near(x: f64) -> f64 {
    2f64.powi(x.log2().round() as i32)
}

fn layer_weights(c_out: usize, c_in: usize, cfg: &GenConfig, rng: &mut impl Rng) -> Result<Tensor> {
    let d = c_in * cfg.kernel * cfg.kernel;
    let data = match cfg.planted_rank {
        Some(r) => {
            // W = A·B with dyadic factors; a power-of-two scale keeps it exact.
            let a: Vec<f64> = (0..c_out * r).map(|_| dyadic(rng)).collect();
            let b: Vec<f64> = (0..r * d).map(|_| dyadic(rng)).collect();
            let scale = 1.0 / pow2_near(((r * d) as f64).sqrt());
            (0..c_out * d)
                .map(|i| {
                    let (o, j) = (i / d, i % d);
                    scale * (0..r).map(|t| a[o * r + t] * b[t * d + j]).sum::<f64>()
                })
                .collect()
        }
        None => {
            let scale = 1.0 / (d as f64).sqrt();
            (0..c_out * d).map(|_| scale * normal(rng)).collect()
        }
    };
    Tensor::new(vec![c_out, c_in, cfg.kernel, cfg.kernel], data)
}

fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// Writes `model.json` and its tensors into `dir`. The same config always
/// produces the same bytes.
pub fn generate(dir: &Path, cfg: &GenConfig) -> Result<ModelManifest> {
    cfg.validate()?;
    let padding = cfg.padding.unwrap_or(cfg.kernel / 2);
    let mut hw = (cfg.size, cfg.size);
    for _ in 1..cfg.channels.len() {
        hw = conv_output_hw(hw.0, hw.1, cfg.kernel, cfg.stride, padding)?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = rng::rng(cfg.seed);

    let (c0, s) = (cfg.channels[0], cfg.size);
    let mut samples: Vec<Tensor> = (0..cfg.batch)
        .map(|_| Tensor::new(vec![c0, s, s], (0..c0 * s * s).map(|_| f32_exact(normal(&mut rng))).collect()))
        .collect::<Result<_>>()?;
    write_tensor(&samples[0], &dir.join("input.tnsr"))?;

    let mut layers = Vec::new();
    for (l, pair) in cfg.channels.windows(2).enumerate() {
        let (c_in, c_out) = (pair[0], pair[1]);
        let weights = layer_weights(c_out, c_in, cfg, &mut rng)?;
        let bias: Vec<f64> = (0..c_out).map(|_| f32_exact(0.1 * normal(&mut rng))).collect();
        let w = WeightTensor::new(weights, bias.clone(), cfg.stride, padding)?;

        let (oh, ow) = w.output_hw(samples[0].dims()[1], samples[0].dims()[2])?;
        let groups = cfg.groups.map(|g| (0..g).map(|k| (k..c_out).step_by(g).collect::<Vec<usize>>()).collect());
        samples = match cfg.groups {
            Some(g) => {
                // Channel c repeats pattern c mod g, so groups are exact.
                (0..cfg.batch)
                    .map(|_| {
                        let patterns: Vec<Vec<f64>> = (0..g)
                            .map(|_| (0..oh * ow).map(|_| f32_exact(rng.random_range(0.0..2.0))).collect())
                            .collect();
                        let data = (0..c_out).flat_map(|c| patterns[c % g].clone()).collect();
                        Tensor::new(vec![c_out, oh, ow], data)
                    })
                    .collect::<Result<_>>()?
            }
            None => samples
                .iter()
                .map(|x| {
                    let y = conv2d_forward(x, &w)?;
                    let data = y.data().iter().map(|v| f32_exact(v.max(0.0))).collect();
                    Tensor::new(y.dims().to_vec(), data)
                })
                .collect::<Result<_>>()?,
        };

        let act: Vec<f64> = samples.iter().flat_map(|t| t.data().iter().copied()).collect();
        let name = format!("conv{l}");
        let file = |kind: &str| PathBuf::from(format!("{name}_{kind}.tnsr"));
        write_tensor(w.weights(), &dir.join(file("weight")))?;
        write_tensor(&Tensor::new(vec![c_out], bias)?, &dir.join(file("bias")))?;
        write_tensor(&Tensor::new(vec![cfg.batch, c_out, oh, ow], act)?, &dir.join(file("act")))?;
        layers.push(LayerEntry {
            name: name.clone(),
            weight: file("weight"),
            bias: file("bias"),
            stride: cfg.stride,
            padding,
            activation: Some(file("act")),
            output_dims: Some([oh, ow]),
            groups,
        });
    }

    let manifest = ModelManifest {
        input: Some("input.tnsr".into()),
        layers,
    };
    write_manifest(&dir.join("model.json"), &manifest)?;
    Ok(manifest)
}
