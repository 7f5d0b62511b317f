use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy-threshold rank selection: retain the smallest rank whose cumulative
/// squared singular values reach `tau` of the total, capped at `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankPolicy {
    tau: f64,
    r_max: usize,
}

impl RankPolicy {
    pub fn new(tau: f64, r_max: usize) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::param(format!("tau must lie in (0, 1], got {tau}")));
        }
        if r_max == 0 {
            return Err(Error::param("r_max must be at least 1"));
        }
        Ok(Self { tau, r_max })
    }

    /// Threshold with no rank cap.
    pub fn uncapped(tau: f64) -> Result<Self> {
        Self::new(tau, usize::MAX)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }
}

/// An all-zero spectrum yields rank 1 so that empty filters still have a
/// (zero) factorisation to store.
pub fn select_rank(sigma: &[f64], policy: &RankPolicy) -> usize {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if sigma.is_empty() || total == 0.0 {
        return 1;
    }
    let mut cumulative = 0.0;
    let mut r = sigma.len();
    for (i, s) in sigma.iter().enumerate() {
        cumulative += s * s;
        if cumulative / total >= policy.tau {
            r = i + 1;
            break;
        }
    }
    r.min(policy.r_max).max(1)
}

/// Fraction of spectral energy carried by the first `r` values.
pub fn retained_energy(sigma: &[f64], r: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1.0;
    }
    sigma[..r.min(sigma.len())].iter().map(|s| s * s).sum::<f64>() / total
}
