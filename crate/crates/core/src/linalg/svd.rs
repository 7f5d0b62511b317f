//! One-sided (Hestenes) Jacobi SVD.
//!
//! Rotations are applied to whichever side of the matrix has fewer columns,
//! so the work is driven by the smaller Gram matrix. Output is deterministic:
//! singular values sorted non-increasing (ties keep their original order), and
//! the first nonzero entry of every left singular vector is non-negative.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Off-diagonal convergence threshold, relative to the column norms.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// Thin SVD `m = u · diag(sigma) · vᵀ`, possibly truncated to rank `sigma.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `m × p` with orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `n × p` with orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `r` triplets.
    pub fn truncate(&self, r: usize) -> Result<SvdFactors> {
        if r == 0 || r > self.rank() {
            return Err(Error::shape(format!(
                "truncation rank {r} outside 1..={}",
                self.rank()
            )));
        }
        Ok(SvdFactors {
            u: self.u.leading_columns(r),
            sigma: self.sigma[..r].to_vec(),
            v: self.v.leading_columns(r),
        })
    }

    /// `u · diag(sigma) · vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let us = self.u.scale_columns(&self.sigma);
        us.matmul(&self.v.transpose())
            .expect("factor shapes agree by construction")
    }

    /// `u · diag(sigma)`, the 1×1 projection weights of the factored form.
    pub fn projection(&self) -> Matrix {
        self.u.scale_columns(&self.sigma)
    }
}

/// Full thin SVD of `m` (`p = min(rows, cols)` triplets).
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    if !m.is_finite() {
        return Err(Error::Numeric("svd input contains non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::shape("svd of an empty matrix"));
    }

    // Rotate the columns of A (rows ≥ cols) or of Aᵀ (rows < cols).
    let tall = rows >= cols;
    let work = if tall { m.columns() } else { m.transpose().columns() };
    let len = if tall { rows } else { cols };
    let Jacobi {
        columns,
        rotation,
    } = hestenes(work)?;

    let mut order: Vec<usize> = (0..columns.len()).collect();
    let norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let candidates: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|&j| {
            (norms[j] > 0.0).then(|| columns[j].iter().map(|x| x / norms[j]).collect())
        })
        .collect();
    let normalized = orthonormalize(candidates, len);
    let rotated: Vec<Vec<f64>> = order.iter().map(|&j| rotation[j].clone()).collect();

    let (mut left, mut right) = if tall {
        (normalized, rotated)
    } else {
        (rotated, normalized)
    };

    for (l, r) in left.iter_mut().zip(right.iter_mut()) {
        if l.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0) {
            l.iter_mut().for_each(|x| *x = -*x);
            r.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(SvdFactors {
        u: Matrix::from_columns(rows, &left),
        sigma,
        v: Matrix::from_columns(cols, &right),
    })
}

struct Jacobi {
    /// `A·V`, columns mutually orthogonal.
    columns: Vec<Vec<f64>>,
    /// Columns of the accumulated rotation `V`.
    rotation: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn hestenes(mut cols: Vec<Vec<f64>>) -> Result<Jacobi> {
    let n = cols.len();
    let mut rot: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns below this squared norm are roundoff residue of a rank-deficient
    // input; rotating against them never settles.
    let total: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * total;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut rot, i, j, c, s);
            }
        }
        if !rotated {
            return Ok(Jacobi {
                columns: cols,
                rotation: rot,
            });
        }
    }
    Err(Error::Numeric(format!(
        "jacobi svd did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn rotate(v: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = v.split_at_mut(j);
    let (a, b) = (&mut head[i], &mut tail[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Modified Gram-Schmidt over the candidates in order. Missing or degenerate
/// candidates (zero singular values) are replaced by the standard basis vector
/// with the largest component orthogonal to the vectors chosen so far.
fn orthonormalize(candidates: Vec<Option<Vec<f64>>>, len: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let accepted = cand.and_then(|mut v| {
            project_out(&mut v, &basis);
            let nv = norm(&v);
            (nv > 0.5).then(|| v.iter().map(|x| x / nv).collect::<Vec<f64>>())
        });
        let q = accepted.unwrap_or_else(|| {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for k in 0..len {
                let mut e = vec![0.0; len];
                e[k] = 1.0;
                project_out(&mut e, &basis);
                let ne = norm(&e);
                if best.as_ref().is_none_or(|(b, _)| ne > *b) {
                    best = Some((ne, e));
                }
            }
            let (ne, e) = best.expect("len > 0");
            e.iter().map(|x| x / ne).collect()
        });
        basis.push(q);
    }
    basis
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let p = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= p * qi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormal_cols(m: &Matrix) -> f64 {
        let g = m.t_matmul(m).unwrap();
        g.sub(&Matrix::identity(m.cols())).unwrap().data().iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    #[test]
    fn diagonal() {
        let m = Matrix::from_fn(3, 3, |i, j| if i == j { 3.0 - i as f64 } else { 0.0 });
        let f = svd(&m).unwrap();
        assert_eq!(f.sigma, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_matrix() {
        let f = svd(&Matrix::zeros(4, 3)).unwrap();
        assert!(f.sigma.iter().all(|&s| s == 0.0));
        assert!(orthonormal_cols(&f.u) < 1e-12);
        assert!(orthonormal_cols(&f.v) < 1e-12);
    }

    #[test]
    fn frobenius_identity_on_random() {
        for (r, c, seed) in [(5, 7, 1), (7, 5, 2), (6, 6, 3), (1, 9, 4), (9, 1, 5)] {
            let m = random(r, c, seed);
            let f = svd(&m).unwrap();
            let energy: f64 = f.sigma.iter().map(|s| s * s).sum();
            let fro = m.frobenius_norm_sq();
            assert!((energy - fro).abs() <= 1e-9 * fro);
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!(orthonormal_cols(&f.u) < 1e-8);
            assert!(orthonormal_cols(&f.v) < 1e-8);
            let err = m.sub(&f.reconstruct()).unwrap().frobenius_norm();
            assert!(err <= 1e-9 * m.frobenius_norm());
        }
    }

    #[test]
    fn rank_deficient_stays_orthonormal() {
        let a = random(8, 2, 10);
        let b = random(2, 5, 11);
        let m = a.matmul(&b).unwrap();
        let f = svd(&m).unwrap();
        assert!(f.sigma[2] <= 1e-12 * f.sigma[0]);
        assert!(orthonormal_cols(&f.u) < 1e-8);
        assert!(orthonormal_cols(&f.v) < 1e-8);
        assert!(m.sub(&f.reconstruct()).unwrap().frobenius_norm() <= 1e-9 * m.frobenius_norm());
    }

    #[test]
    fn sign_convention_and_determinism() {
        let m = random(6, 4, 7);
        let a = svd(&m).unwrap();
        let b = svd(&m).unwrap();
        assert_eq!(a, b);
        for col in a.u.columns() {
            assert!(*col.iter().find(|x| **x != 0.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn truncation_errors() {
        let m = Matrix::from_fn(3, 3, |i, j| if i == j { 3.0 - i as f64 } else { 0.0 });
        let f = svd(&m).unwrap();
        let t = f.truncate(2).unwrap();
        let err = m.sub(&t.reconstruct()).unwrap().frobenius_norm();
        assert!((err - 1.0).abs() < 1e-12);
        let full = f.truncate(3).unwrap();
        assert!(m.sub(&full.reconstruct()).unwrap().frobenius_norm() < 1e-9);
        assert!(matches!(f.truncate(0), Err(Error::Shape(_))));
        assert!(matches!(f.truncate(4), Err(Error::Shape(_))));
    }

    #[test]
    fn rank_one_outer_product() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.25, 1.0, -1.0];
        let m = Matrix::from_fn(4, 3, |i, j| a[i] * b[j]);
        let t = svd(&m).unwrap().truncate(1).unwrap();
        assert!(m.sub(&t.reconstruct()).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 1)] = f64::INFINITY;
        assert!(matches!(svd(&m), Err(Error::Numeric(_))));
    }
}
