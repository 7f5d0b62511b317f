//! Dense tensors, convolution weight banks, and the reshaping primitives the
//! decompositions rely on.
//!
//! Kernels are flattened row-major over `(C_in, κ_h, κ_w)`; [`reshape_to_matrix`]
//! and [`kernel_from_row`] are exact inverses of each other.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::shape(format!("tensor rank {} not in 1..=4", dims.len())));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("zero-sized axis in {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::shape(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("tensor contains non-finite values".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn diff_norm(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    #[cfg(test)]
    fn strides(dims: &[usize]) -> Vec<usize> {
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        strides
    }
}

/// A convolution layer: kernel bank `(C_out, C_in, κ, κ)` plus per-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    w: Tensor,
    bias: Vec<f64>,
    stride: usize,
    padding: usize,
}

impl WeightTensor {
    pub fn new(w: Tensor, bias: Vec<f64>, stride: usize, padding: usize) -> Result<Self> {
        let dims = w.dims();
        if dims.len() != 4 {
            return Err(Error::shape(format!("weight tensor must be 4-D, got {dims:?}")));
        }
        if dims[2] != dims[3] {
            return Err(Error::shape(format!("kernel must be square, got {dims:?}")));
        }
        if bias.len() != dims[0] {
            return Err(Error::shape(format!(
                "bias length {} != C_out {}",
                bias.len(),
                dims[0]
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("bias contains non-finite values".into()));
        }
        if stride == 0 {
            return Err(Error::param("stride must be positive"));
        }
        Ok(Self {
            w,
            bias,
            stride,
            padding,
        })
    }

    pub fn c_out(&self) -> usize {
        self.w.dims()[0]
    }

    pub fn c_in(&self) -> usize {
        self.w.dims()[1]
    }

    pub fn kernel(&self) -> usize {
        self.w.dims()[2]
    }

    /// Flattened kernel length `C_in·κ²`.
    pub fn row_len(&self) -> usize {
        self.c_in() * self.kernel() * self.kernel()
    }

    pub fn weights(&self) -> &Tensor {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    /// Output spatial size for an `h × w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        conv_output_hw(h, w, self.kernel(), self.stride, self.padding)
    }
}

/// Calibration activations `(C_out, H, W)` of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    f: Tensor,
}

impl FeatureTensor {
    pub fn new(f: Tensor) -> Result<Self> {
        if f.dims().len() != 3 {
            return Err(Error::shape(format!(
                "feature tensor must be (C, H, W), got {:?}",
                f.dims()
            )));
        }
        Ok(Self { f })
    }

    /// Accepts `(C, H, W)` as is, or averages an `(N, C, H, W)` batch over `N`.
    pub fn from_batch(t: Tensor) -> Result<Self> {
        match t.dims().len() {
            3 => Self::new(t),
            4 => {
                let d = t.dims().to_vec();
                let (n, per) = (d[0], d[1] * d[2] * d[3]);
                let mut acc = vec![0.0; per];
                for s in 0..n {
                    for (a, x) in acc.iter_mut().zip(&t.data()[s * per..(s + 1) * per]) {
                        *a += x;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= n as f64);
                Self::new(Tensor::new(d[1..].to_vec(), acc)?)
            }
            r => Err(Error::shape(format!(
                "activation tensor must be 3-D or 4-D, got rank {r}"
            ))),
        }
    }

    pub fn channels(&self) -> usize {
        self.f.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.f.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.f.dims()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.f
    }

    /// Activation map of channel `c`, raster order.
    pub fn channel(&self, c: usize) -> &[f64] {
        let hw = self.height() * self.width();
        &self.f.data()[c * hw..(c + 1) * hw]
    }
}

/// `C_out × (C_in·κ²)` matrix whose row `o` is the flattened kernel `𝒲[o,:,:,:]`.
pub fn reshape_to_matrix(w: &WeightTensor) -> Matrix {
    Matrix::new(w.c_out(), w.row_len(), w.weights().data().to_vec())
        .expect("weight tensor length is C_out·C_in·κ²")
}

/// Inverse of [`reshape_to_matrix`]: rebuilds a weight tensor from its matrix form.
pub fn weights_from_matrix(
    m: &Matrix,
    c_in: usize,
    kernel: usize,
    bias: Vec<f64>,
    stride: usize,
    padding: usize,
) -> Result<WeightTensor> {
    if m.cols() != c_in * kernel * kernel {
        return Err(Error::shape(format!(
            "matrix has {} columns, expected C_in·κ² = {}",
            m.cols(),
            c_in * kernel * kernel
        )));
    }
    let t = Tensor::new(vec![m.rows(), c_in, kernel, kernel], m.data().to_vec())?;
    WeightTensor::new(t, bias, stride, padding)
}

/// Unflattens one kernel row into a `(C_in, κ, κ)` tensor.
pub fn kernel_from_row(row: &[f64], c_in: usize, kernel: usize) -> Result<Tensor> {
    let expected = c_in * kernel * kernel;
    if row.len() != expected {
        return Err(Error::shape(format!(
            "kernel row has length {}, expected C_in·κ² = {expected}",
            row.len()
        )));
    }
    Tensor::new(vec![c_in, kernel, kernel], row.to_vec())
}

/// Mode-`axis` unfolding (axis is zero-based). Columns enumerate the remaining
/// axes in ascending order, row-major.
pub fn mode_n_unfold(t: &Tensor, axis: usize) -> Result<Matrix> {
    let dims = t.dims();
    if axis >= dims.len() {
        return Err(Error::shape(format!(
            "axis {axis} out of range for rank-{} tensor",
            dims.len()
        )));
    }
    let rows = dims[axis];
    let cols = t.len() / rows;
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = Matrix::zeros(rows, cols);
    for o in 0..outer {
        for i in 0..rows {
            let src = &t.data()[(o * rows + i) * inner..(o * rows + i + 1) * inner];
            out.row_mut(i)[o * inner..(o + 1) * inner].copy_from_slice(src);
        }
    }
    Ok(out)
}

/// Inverse of [`mode_n_unfold`].
pub fn mode_n_fold(m: &Matrix, axis: usize, dims: &[usize]) -> Result<Tensor> {
    if axis >= dims.len() {
        return Err(Error::shape(format!("axis {axis} out of range for {dims:?}")));
    }
    let total: usize = dims.iter().product();
    if m.rows() != dims[axis] || m.rows() * m.cols() != total {
        return Err(Error::shape(format!(
            "cannot fold {}x{} into {dims:?} along axis {axis}",
            m.rows(),
            m.cols()
        )));
    }
    let rows = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut data = vec![0.0; total];
    for o in 0..outer {
        for i in 0..rows {
            data[(o * rows + i) * inner..(o * rows + i + 1) * inner]
                .copy_from_slice(&m.row(i)[o * inner..(o + 1) * inner]);
        }
    }
    Tensor::new(dims.to_vec(), data)
}

/// Mode product `t ×_axis m`, where `m` is `J × dims[axis]`.
pub fn mode_product(t: &Tensor, axis: usize, m: &Matrix) -> Result<Tensor> {
    let unfolded = mode_n_unfold(t, axis)?;
    let prod = m.matmul(&unfolded)?;
    let mut dims = t.dims().to_vec();
    dims[axis] = m.rows();
    mode_n_fold(&prod, axis, &dims)
}

/// Channel-mean of the activations: an `H × W` map.
pub fn mean_activation_map(f: &FeatureTensor) -> Matrix {
    let (c, h, w) = (f.channels(), f.height(), f.width());
    let mut acc = vec![0.0; h * w];
    for ch in 0..c {
        for (a, x) in acc.iter_mut().zip(f.channel(ch)) {
            *a += x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= c as f64);
    Matrix::new(h, w, acc).expect("h·w entries")
}

#[cfg(test)]
pub(crate) fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    Tensor::strides(dims)
        .iter()
        .zip(idx)
        .map(|(s, i)| s * i)
        .sum()
}

/// `⌊(n + 2p − κ)/s⌋ + 1` along each axis.
pub fn conv_output_hw(
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    let span_h = h + 2 * padding;
    let span_w = w + 2 * padding;
    if stride == 0 || span_h < kernel || span_w < kernel {
        return Err(Error::shape(format!(
            "kernel {kernel} with padding {padding} does not fit a {h}x{w} input"
        )));
    }
    Ok(((span_h - kernel) / stride + 1, (span_w - kernel) / stride + 1))
}
