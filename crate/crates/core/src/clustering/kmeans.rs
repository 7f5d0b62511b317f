//! Lloyd's k-means with k-means++ seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Independent k-means++ initialisations; the lowest objective wins.
    pub restarts: usize,
    /// Stop once the relative objective improvement drops below this.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iterations: 100,
            seed,
            restarts: 8,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster index of every point, in `0..k`.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// `Σ_clusters Σ_members ‖x − μ‖²` for the returned centroids.
    pub objective: f64,
    /// Objective after every assignment step, then the final value.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// `k` exceeded the point count and was reduced to it.
    pub k_clamped: bool,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Member indices per cluster, ascending. Clusters may be empty.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = sq_dist(p, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("some point has positive distance")
        } else {
            // All remaining points coincide with a centroid.
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
    }
    centroids
}

pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<KMeansResult> {
    if points.is_empty() {
        return Err(Error::param("k-means needs at least one point"));
    }
    if cfg.k == 0 {
        return Err(Error::param("k-means needs k ≥ 1"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::shape("k-means points differ in length"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("k-means input contains non-finite values".into()));
    }

    let k_clamped = cfg.k > points.len();
    let k = cfg.k.min(points.len());
    let mut best: Option<KMeansResult> = None;
    for run in 0..cfg.restarts.max(1) {
        let seed = if run == 0 { cfg.seed } else { rng::derive_seed(cfg.seed, run as u64) };
        let fit = lloyd(points, k, seed, cfg);
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    let mut best = best.expect("at least one run");
    best.k_clamped = k_clamped;
    Ok(best)
}

fn lloyd(points: &[Vec<f64>], k: usize, seed: u64, cfg: &KMeansConfig) -> KMeansResult {
    let mut rng = rng::rng(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);

    let mut assignments = vec![0; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations.max(1) {
        iterations += 1;
        let mut objective = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centroids);
            *a = c;
            objective += d;
        }
        let prev = history.last().copied();
        history.push(objective);

        update_centroids(points, &assignments, &mut centroids);
        reseed_empty(points, &mut assignments, &mut centroids);

        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - objective) < cfg.tol * prev {
                break;
            }
        } else if objective == 0.0 {
            break;
        }
    }

    // Centroids are the means of the final assignment.
    update_centroids(points, &assignments, &mut centroids);
    let objective = points
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();
    history.push(objective);

    KMeansResult {
        assignments,
        centroids,
        objective,
        history,
        iterations,
        k_clamped: false,
    }
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    for ((mu, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            *mu = s.into_iter().map(|x| x / n as f64).collect();
        }
    }
}

/// Moves each empty cluster onto the point farthest from its current centroid.
/// Skipped when every point already sits on its centroid.
fn reseed_empty(points: &[Vec<f64>], assignments: &mut [usize], centroids: &mut [Vec<f64>]) {
    let mut counts = vec![0usize; centroids.len()];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..centroids.len() {
        if counts[c] > 0 {
            continue;
        }
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assignments[*i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, d)) = far {
            if d > 0.0 {
                counts[assignments[i]] -= 1;
                assignments[i] = c;
                counts[c] = 1;
                centroids[c] = points[i].clone();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn separated_points() {
        let r = kmeans(&pts(&[0.0, 0.0, 10.0, 10.0]), &KMeansConfig::new(2, 3)).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        let mut c: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_cluster_is_mean() {
        let p = pts(&[1.0, 2.0, 6.0]);
        let r = kmeans(&p, &KMeansConfig::new(1, 0)).unwrap();
        assert!((r.centroids[0][0] - 3.0).abs() < 1e-12);
        // n · population variance
        assert!((r.objective - (4.0 + 1.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn beats_random_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let points: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let r = kmeans(&points, &KMeansConfig::new(3, 1)).unwrap();
        for _ in 0..1000 {
            let labels: Vec<usize> = (0..12).map(|_| rng.random_range(0..3)).collect();
            let mut obj = 0.0;
            for c in 0..3 {
                let members: Vec<&Vec<f64>> =
                    points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                if members.is_empty() {
                    continue;
                }
                let mean: Vec<f64> = (0..2)
                    .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                    .collect();
                obj += members.iter().map(|p| sq_dist(p, &mean)).sum::<f64>();
            }
            assert!(r.objective <= obj + 1e-12);
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec<f64>> =
            (0..200).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        for seed in 0..10 {
            let r = kmeans(&points, &KMeansConfig::new(7, seed)).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        }
    }

    #[test]
    fn clamps_k() {
        let r = kmeans(&pts(&[1.0, 2.0]), &KMeansConfig::new(5, 0)).unwrap();
        assert!(r.k_clamped);
        assert_eq!(r.k(), 2);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn duplicate_points() {
        let r = kmeans(&pts(&[4.0; 6]), &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.assignments.len(), 6);
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Vec<f64>> =
            (0..50).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = kmeans(&points, &KMeansConfig::new(4, 42)).unwrap();
        let b = kmeans(&points, &KMeansConfig::new(4, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(kmeans(&[], &KMeansConfig::new(1, 0)).is_err());
        assert!(kmeans(&pts(&[1.0]), &KMeansConfig::new(0, 0)).is_err());
        assert!(kmeans(&[vec![1.0], vec![1.0, 2.0]], &KMeansConfig::new(1, 0)).is_err());
    }
}
