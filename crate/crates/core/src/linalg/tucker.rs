//! Tucker-2 via truncated HOSVD over the two channel modes of a kernel bank.

use crate::error::{Error, Result};
use crate::linalg::svd::svd;
use crate::matrix::Matrix;
use crate::tensor::{mode_n_unfold, mode_product, Tensor, WeightTensor};

/// `𝒲 ≈ 𝒢 ×₁ U⁽¹⁾ ×₂ U⁽²⁾` with `𝒢` of shape `(r_out, r_in, κ, κ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    pub core: Tensor,
    /// `C_out × r_out`, orthonormal columns.
    pub u1: Matrix,
    /// `C_in × r_in`, orthonormal columns.
    pub u2: Matrix,
}

impl TuckerFactors {
    pub fn r_out(&self) -> usize {
        self.u1.cols()
    }

    pub fn r_in(&self) -> usize {
        self.u2.cols()
    }

    pub fn reconstruct(&self) -> Tensor {
        let t = mode_product(&self.core, 0, &self.u1).expect("core/u1 agree");
        mode_product(&t, 1, &self.u2).expect("core/u2 agree")
    }
}

/// Leading left singular vectors of each channel-mode unfolding of the
/// kernels, plus the projected core.
pub fn tucker2(w: &WeightTensor, r_out: usize, r_in: usize) -> Result<TuckerFactors> {
    let (c_out, c_in) = (w.c_out(), w.c_in());
    if r_out == 0 || r_out > c_out || r_in == 0 || r_in > c_in {
        return Err(Error::shape(format!(
            "tucker ranks ({r_out}, {r_in}) outside (1..={c_out}, 1..={c_in})"
        )));
    }
    let leading = |axis: usize, r: usize| -> Result<Matrix> {
        let mut unfolded = mode_n_unfold(w.weights(), axis)?;
        if unfolded.cols() < r {
            // Zero columns leave the left singular vectors unchanged but give
            // the SVD enough room to complete the basis up to r.
            let (rows, cols) = unfolded.shape();
            unfolded = Matrix::from_fn(rows, r, |i, j| if j < cols { unfolded[(i, j)] } else { 0.0 });
        }
        Ok(svd(&unfolded)?.u.leading_columns(r))
    };
    let u1 = leading(0, r_out)?;
    let u2 = leading(1, r_in)?;
    let core = mode_product(w.weights(), 0, &u1.transpose())?;
    let core = mode_product(&core, 1, &u2.transpose())?;
    Ok(TuckerFactors { core, u1, u2 })
}

/// Parameter count of the three-convolution Tucker-2 form.
pub fn tucker2_params(c_out: usize, c_in: usize, kernel: usize, r_out: usize, r_in: usize) -> u64 {
    (c_in * r_in + r_out * r_in * kernel * kernel + c_out * r_out) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(dims: [usize; 4], seed: u64) -> WeightTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        WeightTensor::new(Tensor::new(dims.to_vec(), data).unwrap(), vec![0.0; dims[0]], 1, 1)
            .unwrap()
    }

    fn rel_err(w: &WeightTensor, f: &TuckerFactors) -> f64 {
        w.weights().diff_norm(&f.reconstruct()) / w.weights().frobenius_norm()
    }

    #[test]
    fn full_rank_is_exact() {
        let w = random_layer([8, 4, 3, 3], 1);
        let f = tucker2(&w, 8, 4).unwrap();
        assert_eq!(f.core.dims(), &[8, 4, 3, 3]);
        assert!(rel_err(&w, &f) <= 1e-8);
    }

    #[test]
    fn separable_tensor_rank_one() {
        let a = [1.0, -0.5, 2.0, 0.25, -1.0];
        let b = [0.3, -2.0, 1.0];
        let k = [1.0, 0.0, -1.0, 2.0];
        let mut data = Vec::new();
        for ai in a {
            for bi in b {
                for ki in k {
                    data.push(ai * bi * ki);
                }
            }
        }
        let w = WeightTensor::new(Tensor::new(vec![5, 3, 2, 2], data).unwrap(), vec![0.0; 5], 1, 0)
            .unwrap();
        let f = tucker2(&w, 1, 1).unwrap();
        assert!(rel_err(&w, &f) <= 1e-8);
    }

    #[test]
    fn error_monotone_over_grid() {
        let w = random_layer([8, 4, 3, 3], 2);
        let mut errs = vec![vec![0.0; 5]; 9];
        for ro in 1..=8 {
            for ri in 1..=4 {
                errs[ro][ri] = rel_err(&w, &tucker2(&w, ro, ri).unwrap());
            }
        }
        for ro in 1..=8 {
            for ri in 1..=4 {
                if ro > 1 {
                    assert!(errs[ro][ri] <= errs[ro - 1][ri] + 1e-12);
                }
                if ri > 1 {
                    assert!(errs[ro][ri] <= errs[ro][ri - 1] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn wide_output_mode() {
        // C_out exceeds C_in·κ², so the mode-0 basis needs completing.
        let w = random_layer([12, 1, 3, 3], 4);
        let f = tucker2(&w, 12, 1).unwrap();
        assert_eq!(f.u1.shape(), (12, 12));
        assert!(rel_err(&w, &f) <= 1e-8);
        let g = f.u1.t_matmul(&f.u1).unwrap();
        assert!(g.sub(&Matrix::identity(12)).unwrap().frobenius_norm() < 1e-10);
    }

    #[test]
    fn rank_out_of_range() {
        let w = random_layer([4, 2, 3, 3], 3);
        assert!(matches!(tucker2(&w, 5, 1), Err(Error::Shape(_))));
        assert!(matches!(tucker2(&w, 1, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn param_formula() {
        assert_eq!(tucker2_params(8, 4, 3, 2, 1), (4 + 2 * 9 + 16) as u64);
    }
}
