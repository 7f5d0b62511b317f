//! Wall-clock comparison of two forward implementations.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Latency {
    pub t_orig_ms: f64,
    pub t_comp_ms: f64,
    pub speedup: f64,
    pub delta_t_pct: f64,
    pub trials: usize,
    pub warmup: usize,
    pub environment: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn time_ms(f: &mut impl FnMut()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

/// Median wall-clock time of each runner. Runs alternate so slow drift on the
/// host affects both sides alike.
pub fn measure_latency(
    mut orig: impl FnMut(),
    mut comp: impl FnMut(),
    warmup: usize,
    trials: usize,
) -> Result<Latency> {
    if trials == 0 {
        return Err(Error::param("latency needs at least one trial"));
    }
    for _ in 0..warmup {
        orig();
        comp();
    }
    let mut t_orig = Vec::with_capacity(trials);
    let mut t_comp = Vec::with_capacity(trials);
    for _ in 0..trials {
        t_orig.push(time_ms(&mut orig));
        t_comp.push(time_ms(&mut comp));
    }
    let (t_orig_ms, t_comp_ms) = (median(t_orig), median(t_comp));
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    Ok(Latency {
        t_orig_ms,
        t_comp_ms,
        speedup: t_orig_ms / t_comp_ms,
        delta_t_pct: (1.0 - t_comp_ms / t_orig_ms) * 100.0,
        trials,
        warmup,
        environment: format!(
            "{}-{}, {threads} hardware threads, single-threaded forward",
            std::env::consts::OS,
            std::env::consts::ARCH
        ),
    })
}
