//! Dense reconstruction and the factored (basis + 1×1) forward pass.

use crate::conv::{add_bias, conv2d_forward_counted, conv_rows, gemm, to_output, MacCounter};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{weights_from_matrix, Tensor, WeightTensor};

use super::{ClusterFactors, CompressedLayer, LayerFactors};

fn check_indices(c: &CompressedLayer, cluster: &ClusterFactors) -> Result<()> {
    if let Some(&bad) = cluster.channel_indices.iter().find(|&&i| i >= c.c_out) {
        return Err(Error::shape(format!("channel index {bad} ≥ C_out = {}", c.c_out)));
    }
    let f = &cluster.factors;
    if f.u.rows() != cluster.len() || f.v.rows() != c.row_len() || f.u.cols() != f.rank() || f.v.cols() != f.rank() {
        return Err(Error::shape(format!(
            "cluster ({}, {}) factor shapes u {:?}, v {:?} do not match {} channels and d = {}",
            cluster.spatial_cluster,
            cluster.channel_cluster,
            f.u.shape(),
            f.v.shape(),
            cluster.len(),
            c.row_len()
        )));
    }
    Ok(())
}

/// Dense weights implied by the stored factors. Channels not covered by any
/// cluster come back as zero kernels.
pub fn reconstruct_weights(c: &CompressedLayer) -> Result<WeightTensor> {
    match &c.factors {
        LayerFactors::Clusters(clusters) => {
            let mut m = Matrix::zeros(c.c_out, c.row_len());
            for cluster in clusters {
                check_indices(c, cluster)?;
                let rows = cluster.factors.reconstruct();
                for (i, &ch) in cluster.channel_indices.iter().enumerate() {
                    m.row_mut(ch).copy_from_slice(rows.row(i));
                }
            }
            weights_from_matrix(&m, c.c_in, c.kernel, c.bias.clone(), c.stride, c.padding)
        }
        LayerFactors::Tucker(t) => {
            WeightTensor::new(t.reconstruct(), c.bias.clone(), c.stride, c.padding)
        }
        LayerFactors::Dense(w) => WeightTensor::new(w.clone(), c.bias.clone(), c.stride, c.padding),
    }
}

pub fn factored_forward(c: &CompressedLayer, x: &Tensor) -> Result<Tensor> {
    factored_forward_counted(c, x, &mut MacCounter::default())
}

/// Runs the layer in its factored form, tallying every multiply-accumulate.
pub fn factored_forward_counted(
    c: &CompressedLayer,
    x: &Tensor,
    counter: &mut MacCounter,
) -> Result<Tensor> {
    let d = x.dims();
    if d.len() != 3 || d[0] != c.c_in {
        return Err(Error::shape(format!(
            "input dims {d:?} do not match C_in = {}",
            c.c_in
        )));
    }
    match &c.factors {
        LayerFactors::Clusters(clusters) => {
            let mut out: Option<(Matrix, (usize, usize))> = None;
            for cluster in clusters {
                check_indices(c, cluster)?;
                // r basis kernels, then a 1×1 projection back to |C| channels.
                let basis_kernels = cluster.factors.v.transpose();
                let (basis, hw) = conv_rows(x, &basis_kernels, c.kernel, c.stride, c.padding, counter)?;
                let y = gemm(&cluster.factors.projection(), &basis, counter)?;
                let (acc, _) = out.get_or_insert_with(|| (Matrix::zeros(c.c_out, basis.cols()), hw));
                for (i, &ch) in cluster.channel_indices.iter().enumerate() {
                    acc.row_mut(ch).copy_from_slice(y.row(i));
                }
            }
            let (mut y, hw) = match out {
                Some(o) => o,
                None => {
                    let hw = crate::tensor::conv_output_hw(d[1], d[2], c.kernel, c.stride, c.padding)?;
                    (Matrix::zeros(c.c_out, hw.0 * hw.1), hw)
                }
            };
            add_bias(&mut y, &c.bias);
            to_output(y, hw)
        }
        LayerFactors::Tucker(t) => {
            let (h, w) = (d[1], d[2]);
            let xm = Matrix::new(c.c_in, h * w, x.data().to_vec())?;
            let reduced = gemm(&t.u2.transpose(), &xm, counter)?;
            let reduced = Tensor::new(vec![t.r_in(), h, w], reduced.into_data())?;
            let core = Matrix::new(t.r_out(), t.r_in() * c.kernel * c.kernel, t.core.data().to_vec())?;
            let (z, hw) = conv_rows(&reduced, &core, c.kernel, c.stride, c.padding, counter)?;
            let mut y = gemm(&t.u1, &z, counter)?;
            add_bias(&mut y, &c.bias);
            to_output(y, hw)
        }
        LayerFactors::Dense(_) => conv2d_forward_counted(x, &reconstruct_weights(c)?, counter),
    }
}
