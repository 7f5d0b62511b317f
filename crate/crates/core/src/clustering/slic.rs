//! SLIC superpixels on a single-channel map.
//!
//! Centers start on a regular grid with spacing `g = √(HW/S)`. Each iteration
//! assigns pixels within a `2g × 2g` window of a center by
//! `|I − I_c| + (m/g)·‖p − p_c‖`, then moves centers to their members' mean.
//! A final pass folds disconnected fragments into the neighbouring segment they
//! share the longest border with, so every region is 4-connected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicConfig {
    /// Target superpixel count `S`.
    pub superpixels: usize,
    pub iterations: usize,
    /// Weight `m` of spatial against intensity distance.
    pub compactness: f64,
}

impl SlicConfig {
    pub fn new(superpixels: usize) -> Self {
        Self {
            superpixels,
            iterations: 10,
            compactness: 10.0,
        }
    }
}

/// Partition of an `H × W` grid into 4-connected regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabeling {
    height: usize,
    width: usize,
    /// Region index per pixel (raster order), in `0..count`.
    labels: Vec<usize>,
    /// Raster-ordered pixel indices of each region.
    regions: Vec<Vec<usize>>,
}

impl RegionLabeling {
    /// Builds a labeling from a per-pixel label map, renumbering labels in
    /// order of first appearance.
    pub fn from_labels(height: usize, width: usize, raw: &[usize]) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::shape("label map size mismatch"));
        }
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut regions: Vec<Vec<usize>> = Vec::new();
        for (p, &l) in raw.iter().enumerate() {
            let id = *remap.entry(l).or_insert_with(|| {
                regions.push(Vec::new());
                regions.len() - 1
            });
            regions[id].push(p);
            labels.push(id);
        }
        Ok(Self {
            height,
            width,
            labels,
            regions,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Realised region count.
    pub fn count(&self) -> usize {
        self.regions.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn region(&self, s: usize) -> &[usize] {
        &self.regions[s]
    }

    pub fn regions(&self) -> &[Vec<usize>] {
        &self.regions
    }

    /// Describes the first broken partition property, if any: every pixel
    /// labelled once, regions non-empty, each region 4-connected.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.height * self.width;
        if self.labels.len() != n {
            return Err("label map does not cover the grid".into());
        }
        let mut seen = vec![false; n];
        let mut pieces = vec![0usize; self.regions.len()];
        for c in components(self.height, self.width, &self.labels) {
            if let Some(k) = pieces.get_mut(self.labels[c[0]]) {
                *k += 1;
            }
        }
        for (s, region) in self.regions.iter().enumerate() {
            if region.is_empty() {
                return Err(format!("region {s} is empty"));
            }
            for &p in region {
                if p >= n || seen[p] {
                    return Err(format!("pixel {p} assigned twice or out of range"));
                }
                if self.labels[p] != s {
                    return Err(format!("pixel {p} label disagrees with region {s}"));
                }
                seen[p] = true;
            }
            if pieces[s] != 1 {
                return Err(format!("region {s} is not 4-connected"));
            }
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(format!("pixel {p} not covered"));
        }
        Ok(())
    }
}

pub fn slic_segment(map: &Matrix, cfg: &SlicConfig) -> Result<RegionLabeling> {
    let (h, w) = map.shape();
    let n = h * w;
    if cfg.superpixels == 0 || cfg.superpixels > n {
        return Err(Error::param(format!(
            "superpixel count {} outside 1..={n}",
            cfg.superpixels
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::param("SLIC needs at least one iteration"));
    }
    if !(cfg.compactness > 0.0) {
        return Err(Error::param("compactness must be positive"));
    }
    if !map.is_finite() {
        return Err(Error::Numeric("activation map contains non-finite values".into()));
    }

    let g = (n as f64 / cfg.superpixels as f64).sqrt();
    let ny = ((h as f64 / g).round() as usize).clamp(1, h);
    let nx = ((w as f64 / g).round() as usize).clamp(1, w);

    // (y, x, intensity)
    let mut centers: Vec<(f64, f64, f64)> = Vec::with_capacity(ny * nx);
    for gy in 0..ny {
        for gx in 0..nx {
            let y = ((gy as f64 + 0.5) * h as f64 / ny as f64).floor().min((h - 1) as f64);
            let x = ((gx as f64 + 0.5) * w as f64 / nx as f64).floor().min((w - 1) as f64);
            centers.push((y, x, map[(y as usize, x as usize)]));
        }
    }

    let spatial_weight = cfg.compactness / g;
    let window = (2.0 * g).ceil() as isize;
    let mut labels = vec![usize::MAX; n];

    for _ in 0..cfg.iterations {
        let mut best = vec![f64::INFINITY; n];
        labels.iter_mut().for_each(|l| *l = usize::MAX);
        for (c, &(cy, cx, ci)) in centers.iter().enumerate() {
            let (y0, y1) = window_bounds(cy, window, h);
            let (x0, x1) = window_bounds(cx, window, w);
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = distance(map[(y, x)], y, x, (cy, cx, ci), spatial_weight);
                    let p = y * w + x;
                    if d < best[p] {
                        best[p] = d;
                        labels[p] = c;
                    }
                }
            }
        }
        // Pixels outside every window fall back to a full search.
        for p in 0..n {
            if labels[p] == usize::MAX {
                let (y, x) = (p / w, p % w);
                labels[p] = centers
                    .iter()
                    .enumerate()
                    .map(|(c, &ctr)| (c, distance(map[(y, x)], y, x, ctr, spatial_weight)))
                    .fold((0, f64::INFINITY), |b, (c, d)| if d < b.1 { (c, d) } else { b })
                    .0;
            }
        }

        let mut acc = vec![(0.0, 0.0, 0.0, 0usize); centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            let a = &mut acc[l];
            a.0 += (p / w) as f64;
            a.1 += (p % w) as f64;
            a.2 += map.data()[p];
            a.3 += 1;
        }
        for (ctr, a) in centers.iter_mut().zip(acc) {
            if a.3 > 0 {
                let k = a.3 as f64;
                *ctr = (a.0 / k, a.1 / k, a.2 / k);
            }
        }
    }

    let merged = enforce_connectivity(h, w, &labels);
    RegionLabeling::from_labels(h, w, &merged)
}

fn window_bounds(center: f64, window: isize, limit: usize) -> (usize, usize) {
    let c = center.round() as isize;
    let lo = (c - window).max(0) as usize;
    let hi = ((c + window + 1).max(0) as usize).min(limit);
    (lo, hi)
}

fn distance(value: f64, y: usize, x: usize, ctr: (f64, f64, f64), spatial_weight: f64) -> f64 {
    let dy = y as f64 - ctr.0;
    let dx = x as f64 - ctr.1;
    (value - ctr.2).abs() + spatial_weight * (dy * dy + dx * dx).sqrt()
}

/// 4-connected components, each as a raster-ordered pixel list, in order of
/// their first pixel.
fn components(h: usize, w: usize, labels: &[usize]) -> Vec<Vec<usize>> {
    let mut comp = vec![usize::MAX; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        comp[start] = id;
        while let Some(p) = stack.pop() {
            members.push(p);
            for q in neighbours(p, h, w) {
                if comp[q] == usize::MAX && labels[q] == labels[start] {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn neighbours(p: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (y, x) = (p / w, p % w);
    [
        (y > 0).then(|| p - w),
        (y + 1 < h).then(|| p + w),
        (x > 0).then(|| p - 1),
        (x + 1 < w).then(|| p + 1),
    ]
    .into_iter()
    .flatten()
}

/// Keeps the largest component of every label; each other fragment joins the
/// adjacent component it shares the most border pixels with.
fn enforce_connectivity(h: usize, w: usize, labels: &[usize]) -> Vec<usize> {
    let comps = components(h, w, labels);
    let mut comp_of = vec![0; h * w];
    for (c, members) in comps.iter().enumerate() {
        for &p in members {
            comp_of[p] = c;
        }
    }

    let mut largest: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (c, members) in comps.iter().enumerate() {
        let l = labels[members[0]];
        let e = largest.entry(l).or_insert(c);
        if comps[*e].len() < members.len() {
            *e = c;
        }
    }

    // Union-find over components.
    let mut parent: Vec<usize> = (0..comps.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for (c, members) in comps.iter().enumerate() {
        if largest[&labels[members[0]]] == c {
            continue;
        }
        let mut border: std::collections::BTreeMap<usize, usize> = Default::default();
        for &p in members {
            for q in neighbours(p, h, w) {
                if comp_of[q] != c {
                    *border.entry(comp_of[q]).or_default() += 1;
                }
            }
        }
        if let Some((&target, _)) = border
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        {
            let (ra, rb) = (find(&mut parent, c), find(&mut parent, target));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }

    (0..h * w).map(|p| find(&mut parent, comp_of[p])).collect()
}
