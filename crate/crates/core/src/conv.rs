//! Reference 2-D convolution via explicit patch extraction.
//!
//! Cross-correlation convention (no kernel flip), symmetric zero padding.
//! Every forward path in the crate funnels its arithmetic through [`gemm`],
//! which tallies multiply-accumulates into a [`MacCounter`].

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{conv_output_hw, reshape_to_matrix, Tensor, WeightTensor};

/// Running count of multiply-accumulate operations actually executed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacCounter {
    pub macs: u64,
}

/// Patch matrix of shape `(C_in·κ²) × (H'·W')`; row `c·κ² + i·κ + j` holds the
/// input value under kernel tap `(c, i, j)` for every output position.
pub fn im2col(x: &Tensor, kernel: usize, stride: usize, padding: usize) -> Result<Matrix> {
    let d = x.dims();
    if d.len() != 3 {
        return Err(Error::shape(format!("conv input must be (C, H, W), got {d:?}")));
    }
    let (c_in, h, w) = (d[0], d[1], d[2]);
    let (oh, ow) = conv_output_hw(h, w, kernel, stride, padding)?;
    let mut cols = Matrix::zeros(c_in * kernel * kernel, oh * ow);
    let data = x.data();
    for c in 0..c_in {
        for ki in 0..kernel {
            for kj in 0..kernel {
                let row = cols.row_mut((c * kernel + ki) * kernel + kj);
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kj) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        row[oy * ow + ox] = data[(c * h + iy as usize) * w + ix as usize];
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// Plain triple-loop product that counts one MAC per inner multiply-add.
pub fn gemm(a: &Matrix, b: &Matrix, counter: &mut MacCounter) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape(format!(
            "gemm {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let av = a[(i, k)];
            let out_row = out.row_mut(i);
            for (o, bv) in out_row.iter_mut().zip(b.row(k)) {
                *o += av * bv;
            }
            counter.macs += b.cols() as u64;
        }
    }
    Ok(out)
}

/// Convolves `x` with the kernels stored as rows of `kernels`
/// (`out × C_in·κ²`). Returns the `out × (H'·W')` response and `(H', W')`.
pub fn conv_rows(
    x: &Tensor,
    kernels: &Matrix,
    kernel: usize,
    stride: usize,
    padding: usize,
    counter: &mut MacCounter,
) -> Result<(Matrix, (usize, usize))> {
    let d = x.dims();
    if d.len() != 3 {
        return Err(Error::shape(format!("conv input must be (C, H, W), got {d:?}")));
    }
    if kernels.cols() != d[0] * kernel * kernel {
        return Err(Error::shape(format!(
            "input has {} channels but kernels expect {}",
            d[0],
            kernels.cols() / (kernel * kernel).max(1)
        )));
    }
    let hw = conv_output_hw(d[1], d[2], kernel, stride, padding)?;
    let patches = im2col(x, kernel, stride, padding)?;
    Ok((gemm(kernels, &patches, counter)?, hw))
}

pub(crate) fn add_bias(y: &mut Matrix, bias: &[f64]) {
    for (o, b) in bias.iter().enumerate() {
        y.row_mut(o).iter_mut().for_each(|v| *v += b);
    }
}

pub(crate) fn to_output(y: Matrix, (oh, ow): (usize, usize)) -> Result<Tensor> {
    let c = y.rows();
    Tensor::new(vec![c, oh, ow], y.into_data())
}

/// Dense forward `𝒴_o = 𝒲_o ∗ 𝒳 + b_o` for an input `(C_in, H, W)`.
pub fn conv2d_forward(x: &Tensor, w: &WeightTensor) -> Result<Tensor> {
    conv2d_forward_counted(x, w, &mut MacCounter::default())
}

pub fn conv2d_forward_counted(
    x: &Tensor,
    w: &WeightTensor,
    counter: &mut MacCounter,
) -> Result<Tensor> {
    let kmat = reshape_to_matrix(w);
    let (mut y, hw) = conv_rows(x, &kmat, w.kernel(), w.stride(), w.padding(), counter)?;
    add_bias(&mut y, w.bias());
    to_output(y, hw)
}
