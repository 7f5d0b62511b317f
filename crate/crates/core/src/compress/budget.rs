//! Rank selection for the baselines under a parameter budget.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{tucker2, tucker2_params};
use crate::tensor::WeightTensor;

use super::{tucker_layer, CompressedLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BudgetRank {
    pub rank: usize,
    /// The target was below the rank-1 cost; rank 1 was used instead.
    pub infeasible: bool,
}

/// Global-SVD rank whose cost `r·(n + d)` is closest to `target`, ties toward
/// the smaller rank.
pub fn rank_for_budget(c_out: usize, c_in: usize, kernel: usize, target: f64) -> BudgetRank {
    let (n, d) = (c_out, c_in * kernel * kernel);
    let per_rank = (n + d) as f64;
    let max = n.min(d).max(1);
    let mut best = (1, f64::INFINITY);
    for r in 1..=max {
        let gap = (r as f64 * per_rank - target).abs();
        if gap < best.1 {
            best = (r, gap);
        }
    }
    BudgetRank {
        rank: best.0,
        infeasible: target < per_rank,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuckerChoice {
    pub r_out: usize,
    pub r_in: usize,
    pub params: u64,
    pub infeasible: bool,
}

/// Exhaustive search over every `(r_out, r_in)` pair. Pairs equally close to
/// the target are separated by reconstruction error, then by rank order.
pub fn tucker2_choice(w: &WeightTensor, target: f64) -> Result<TuckerChoice> {
    if !target.is_finite() {
        return Err(Error::param(format!("parameter target {target} is not finite")));
    }
    let (c_out, c_in, k) = (w.c_out(), w.c_in(), w.kernel());
    let mut tied: Vec<(usize, usize)> = Vec::new();
    let mut best_gap = f64::INFINITY;
    for r_out in 1..=c_out {
        for r_in in 1..=c_in {
            let gap = (tucker2_params(c_out, c_in, k, r_out, r_in) as f64 - target).abs();
            if gap < best_gap {
                best_gap = gap;
                tied.clear();
            }
            if gap == best_gap {
                tied.push((r_out, r_in));
            }
        }
    }
    let (r_out, r_in) = if tied.len() == 1 {
        tied[0]
    } else {
        // ‖𝒲 − 𝒲̂‖² = ‖𝒲‖² − ‖𝒢‖² for orthonormal HOSVD factors.
        let mut best = (tied[0], f64::INFINITY);
        for &(ro, ri) in &tied {
            let core = tucker2(w, ro, ri)?.core;
            let err = w.weights().frobenius_norm().powi(2) - core.frobenius_norm().powi(2);
            if err < best.1 {
                best = ((ro, ri), err);
            }
        }
        best.0
    };
    Ok(TuckerChoice {
        r_out,
        r_in,
        params: tucker2_params(c_out, c_in, k, r_out, r_in),
        infeasible: target < tucker2_params(c_out, c_in, k, 1, 1) as f64,
    })
}

pub fn compress_tucker2(w: &WeightTensor, target: f64) -> Result<(CompressedLayer, TuckerChoice)> {
    let choice = tucker2_choice(w, target)?;
    let factors = tucker2(w, choice.r_out, choice.r_in)?;
    Ok((tucker_layer(w, factors), choice))
}
