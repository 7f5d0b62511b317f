//! Acceptance checks. Each check prints one PASS/FAIL line; the process exits
//! non-zero if any check fails. Expected values come from oracles written
//! here, independently of the library code paths they test.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clusvd::clustering::{build_cluster_model, HierarchyConfig};
use clusvd::compress::{
    compress_global_svd, compress_hierarchical, factored_forward, factored_forward_counted, rank_for_budget,
    reconstruct_weights,
};
use clusvd::conv::MacCounter;
use clusvd::io::load_model;
use clusvd::linalg::{select_rank, svd, tucker2, RankPolicy};
use clusvd::matrix::Matrix;
use clusvd::metrics::{bootstrap_se, classification_report, cost_report, Metric, PredictionSet};
use clusvd::tensor::{FeatureTensor, Tensor, WeightTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------- oracles ----------

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, uniform(rng, rows * cols, -1.0, 1.0)).unwrap()
}

fn random_layer(rng: &mut ChaCha8Rng, c_out: usize, c_in: usize, k: usize, stride: usize, pad: usize) -> WeightTensor {
    let w = Tensor::new(vec![c_out, c_in, k, k], uniform(rng, c_out * c_in * k * k, -1.0, 1.0)).unwrap();
    WeightTensor::new(w, uniform(rng, c_out, -0.5, 0.5), stride, pad).unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureTensor {
    FeatureTensor::new(Tensor::new(vec![c, h, w], uniform(rng, c * h * w, 0.0, 2.0)).unwrap()).unwrap()
}

fn frob_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `Σ_i Σ_j (A − U_r diag(σ_r) V_rᵀ)_ij²` by explicit loops.
fn truncation_residual_sq(a: &Matrix, u: &Matrix, sigma: &[f64], v: &Matrix, r: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let approx: f64 = (0..r).map(|t| u[(i, t)] * sigma[t] * v[(j, t)]).sum();
            total += (a[(i, j)] - approx).powi(2);
        }
    }
    total
}

/// Direct 2-D cross-correlation with zero padding.
fn naive_conv(x: &Tensor, w: &WeightTensor) -> Tensor {
    let (ci, h, wd) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let (co, k, s, p) = (w.c_out(), w.kernel(), w.stride(), w.padding());
    let oh = (h + 2 * p - k) / s + 1;
    let ow = (wd + 2 * p - k) / s + 1;
    let wt = w.weights().data();
    let mut out = vec![0.0; co * oh * ow];
    for o in 0..co {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = w.bias()[o];
                for c in 0..ci {
                    for i in 0..k {
                        for j in 0..k {
                            let iy = (y * s + i) as isize - p as isize;
                            let ix = (xx * s + j) as isize - p as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                acc += wt[((o * ci + c) * k + i) * k + j] * x.data()[(c * h + iy as usize) * wd + ix as usize];
                            }
                        }
                    }
                }
                out[(o * oh + y) * ow + xx] = acc;
            }
        }
    }
    Tensor::new(vec![co, oh, ow], out).unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = frob_sq(b).sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// True when `sets` are pairwise disjoint, non-empty and cover `0..n`.
fn partitions(sets: &[Vec<usize>], n: usize) -> bool {
    let mut seen = BTreeSet::new();
    for s in sets {
        if s.is_empty() {
            return false;
        }
        for &x in s {
            if x >= n || !seen.insert(x) {
                return false;
            }
        }
    }
    seen.len() == n
}

/// Every label value forms one 4-connected component, labels are `0..count`.
fn labels_are_connected_regions(labels: &[usize], h: usize, w: usize, count: usize) -> bool {
    if labels.len() != h * w || labels.iter().any(|&l| l >= count) {
        return false;
    }
    let mut components = vec![0usize; count];
    let mut seen = vec![false; h * w];
    for start in 0..h * w {
        if seen[start] {
            continue;
        }
        components[labels[start]] += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            let mut nb = Vec::new();
            if y > 0 {
                nb.push(p - w);
            }
            if y + 1 < h {
                nb.push(p + w);
            }
            if x > 0 {
                nb.push(p - 1);
            }
            if x + 1 < w {
                nb.push(p + 1);
            }
            for q in nb {
                if !seen[q] && labels[q] == labels[p] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    components.iter().all(|&c| c == 1)
}

fn oracle_rank(sigma: &[f64], tau: f64, r_max: usize) -> usize {
    let total: f64 = frob_sq(sigma);
    if total == 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    let mut r = sigma.len();
    for (i, s) in sigma.iter().enumerate() {
        acc += s * s;
        if acc / total >= tau {
            r = i + 1;
            break;
        }
    }
    r.min(r_max).max(1)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clusvd"))
}

// ---------- checks ----------

fn eckart_young() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=32), rng.random_range(1..=64));
        let a = random_matrix(&mut rng, m, n);
        let f = svd(&a).map_err(|e| e.to_string())?;
        let r = rng.random_range(1..=m.min(n));
        let tail: f64 = frob_sq(&f.sigma[r..]);
        let err = truncation_residual_sq(&a, &f.u, &f.sigma, &f.v, r);
        let rel = if tail > 0.0 { (err - tail).abs() / tail } else { err / frob_sq(a.data()) };
        worst = worst.max(rel);
    }
    let t = start.elapsed();
    ensure!(worst <= 1e-8, "max relative gap {worst:.2e}");
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("100 matrices, max rel gap {worst:.1e}, {:.2} s", t.as_secs_f64()))
}

fn lossless_round_trip() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_w, mut worst_y): (f64, f64) = (0.0, 0.0);
    for i in 0..20 {
        let k = [1, 3, 5][i % 3];
        let (c_out, c_in) = (rng.random_range(2..=16), rng.random_range(1..=6));
        let (stride, pad) = (rng.random_range(1..=2), rng.random_range(0..=k / 2));
        let w = random_layer(&mut rng, c_out, c_in, k, stride, pad);
        let (h, wd) = (rng.random_range(k..k + 8), rng.random_range(k..k + 8));
        let (oh, ow) = w.output_hw(h, wd).unwrap();
        let f = random_features(&mut rng, c_out, oh, ow);
        let s = (oh * ow).min(rng.random_range(1..=8));
        let cfg = HierarchyConfig::new(s, rng.random_range(1..=3), rng.random_range(1..=3), i as u64);
        let policy = RankPolicy::new(1.0, c_out.min(c_in * k * k)).unwrap();
        let c = compress_hierarchical(&w, &f, &cfg, &policy).map_err(|e| e.to_string())?.layer;
        let rec = reconstruct_weights(&c).unwrap();
        worst_w = worst_w.max(rel_diff(rec.weights().data(), w.weights().data()));
        let x = Tensor::new(vec![c_in, h, wd], uniform(&mut rng, c_in * h * wd, -1.0, 1.0)).unwrap();
        let y = factored_forward(&c, &x).map_err(|e| e.to_string())?;
        worst_y = worst_y.max(rel_diff(y.data(), naive_conv(&x, &w).data()));
    }
    let t = start.elapsed();
    ensure!(worst_w <= 1e-8, "weight rel error {worst_w:.2e}");
    ensure!(worst_y <= 1e-6, "forward rel error {worst_y:.2e}");
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok(format!("20 layers, weights {worst_w:.1e}, forward {worst_y:.1e}, {:.2} s", t.as_secs_f64()))
}

fn rank_selection() -> Check {
    let sigma = [2.0, 1.0, 1.0];
    let table = [(0.6, usize::MAX, 1), (0.9, 2, 2), (0.9, usize::MAX, 3), (1.0, usize::MAX, 3)];
    for (tau, r_max, want) in table {
        let p = if r_max == usize::MAX { RankPolicy::uncapped(tau) } else { RankPolicy::new(tau, r_max) }.unwrap();
        let got = select_rank(&sigma, &p);
        ensure!(got == want, "tau {tau}, r_max {r_max}: got {got}, want {want}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..1000 {
        let n = rng.random_range(1..=20);
        let mut s = uniform(&mut rng, n, 0.0, 5.0);
        s.sort_by(|a, b| b.total_cmp(a));
        let r_max = rng.random_range(1..=n + 2);
        let (t1, t2) = (rng.random_range(0.01..1.0f64), rng.random_range(0.01..1.0f64));
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a = select_rank(&s, &RankPolicy::new(lo, r_max).unwrap());
        let b = select_rank(&s, &RankPolicy::new(hi, r_max).unwrap());
        ensure!(a <= b, "rank fell from {a} to {b} as tau rose {lo} -> {hi} on {s:?}");
        ensure!(a == oracle_rank(&s, lo, r_max), "definition mismatch on {s:?} tau {lo}");
    }
    Ok("worked table exact, 1000 spectra monotone".into())
}

fn partition_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0;
    for i in 0..50 {
        let (c, h, w) = (rng.random_range(2..=12), rng.random_range(3..=14), rng.random_range(3..=14));
        let f = random_features(&mut rng, c, h, w);
        let cfg = HierarchyConfig::new(rng.random_range(1..=(h * w).min(20)), rng.random_range(1..=4), rng.random_range(1..=4), i);
        let m = build_cluster_model(&f, &cfg).map_err(|e| e.to_string())?;
        let lab = &m.labeling;
        let regions = lab.count();
        if !labels_are_connected_regions(lab.labels(), h, w, regions) {
            violations += 1;
        }
        if !partitions(&m.spatial, regions) {
            violations += 1;
        }
        for groups in &m.channels {
            let nonempty: Vec<Vec<usize>> = groups.iter().filter(|g| !g.is_empty()).cloned().collect();
            if !partitions(&nonempty, c) {
                violations += 1;
            }
        }
        let groups: Vec<Vec<usize>> = m.compression_groups().into_iter().map(|g| g.channels).collect();
        if !partitions(&groups, c) {
            violations += 1;
        }
    }
    ensure!(violations == 0, "{violations} violations");
    Ok("50 tensors, 0 violations".into())
}

fn planted_coactivation() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut clusters_checked = 0;
    for seed in 0..20u64 {
        let out = dir.path().join(format!("s{seed}"));
        let status = bin()
            .args(["gen", "--groups", "2", "--channels", "3,8,10", "--size", "12", "--seed", &seed.to_string()])
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.success(), "gen failed for seed {seed}");
        let model = load_model(&out.join("model.json")).map_err(|e| e.to_string())?;
        for l in &model.layers {
            let planted: BTreeSet<BTreeSet<usize>> =
                l.groups.as_ref().unwrap().iter().map(|g| g.iter().copied().collect()).collect();
            let f = l.activation.as_ref().unwrap();
            let m = build_cluster_model(f, &HierarchyConfig::new(12, 2, 2, seed)).map_err(|e| e.to_string())?;
            for (k, groups) in m.channels.iter().enumerate() {
                let found: BTreeSet<BTreeSet<usize>> = groups.iter().map(|g| g.iter().copied().collect()).collect();
                ensure!(found == planted, "seed {seed}, {}, spatial cluster {k}: {found:?}", l.name);
                clusters_checked += 1;
            }
        }
    }
    Ok(format!("20 seeds, {clusters_checked} spatial clusters, purity 100%"))
}

fn cost_formulas() -> Check {
    // worked example: n = 8, d = 27, r = 2, H' = W' = 4
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let w = random_layer(&mut rng, 8, 3, 3, 1, 1);
    let c = compress_global_svd(&w, 2).unwrap();
    let r = cost_report(std::slice::from_ref(&w), std::slice::from_ref(&c), &[(4, 4)], None).unwrap();
    ensure!(r.p_orig == 216 && r.p_comp == 70, "params {} -> {}", r.p_orig, r.p_comp);
    ensure!((r.cr_model - 3.086).abs() < 5e-4, "CR {}", r.cr_model);
    ensure!(r.flops_orig == 3456 && r.flops_comp == 1120, "FLOPs {} -> {}", r.flops_orig, r.flops_comp);

    for i in 0..50 {
        let k = [1, 3, 5][i % 3];
        let (c_out, c_in) = (rng.random_range(2..=16), rng.random_range(1..=5));
        let (stride, pad) = (rng.random_range(1..=2), rng.random_range(0..=k / 2));
        let w = random_layer(&mut rng, c_out, c_in, k, stride, pad);
        let (h, wd) = (rng.random_range(k..k + 7), rng.random_range(k..k + 7));
        let (oh, ow) = w.output_hw(h, wd).unwrap();
        let f = random_features(&mut rng, c_out, oh, ow);
        let cfg = HierarchyConfig::new((oh * ow).min(6), rng.random_range(1..=3), rng.random_range(1..=3), i as u64);
        let policy = RankPolicy::new(rng.random_range(0.5..1.0), rng.random_range(1..=4)).unwrap();
        let c = compress_hierarchical(&w, &f, &cfg, &policy).map_err(|e| e.to_string())?.layer;

        let d = c_in * k * k;
        let want_p: u64 = c.clusters().iter().map(|cl| (cl.rank() * (cl.len() + d)) as u64).sum();
        let want_f: u64 = (oh * ow) as u64
            * c.clusters().iter().map(|cl| (cl.rank() * d + cl.len() * cl.rank()) as u64).sum::<u64>();

        let x = Tensor::new(vec![c_in, h, wd], uniform(&mut rng, c_in * h * wd, -1.0, 1.0)).unwrap();
        let mut counter = MacCounter::default();
        factored_forward_counted(&c, &x, &mut counter).unwrap();
        let rep = cost_report(&[w], &[c], &[(oh, ow)], None).unwrap();
        ensure!(rep.p_comp == want_p, "config {i}: P_comp {} vs {want_p}", rep.p_comp);
        ensure!(rep.flops_comp == want_f, "config {i}: FLOPs formula {} vs {want_f}", rep.flops_comp);
        ensure!(counter.macs == want_f, "config {i}: executed MACs {} vs {want_f}", counter.macs);
    }
    Ok("worked example exact, 50 configurations match the MAC count".into())
}

fn budget_mapping() -> Check {
    let got = rank_for_budget(64, 3, 3, 576.0);
    ensure!(got.rank == 6, "rank_for_budget(64, 27, 576) = {}", got.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..200 {
        let (n, c_in, k) = (rng.random_range(1..=80), rng.random_range(1..=8), [1, 3, 5][rng.random_range(0..3)]);
        let d = c_in * k * k;
        let target = rng.random_range((n + d) as f64..(n * d) as f64 + (n + d) as f64);
        let r = rank_for_budget(n, c_in, k, target).rank;
        let gap = |r: usize| (r as f64 * (n + d) as f64 - target).abs();
        let best = (1..=n.min(d)).map(gap).fold(f64::INFINITY, f64::min);
        let first_best = (1..=n.min(d)).find(|&q| gap(q) == best).unwrap();
        ensure!(r == first_best, "n {n}, d {d}, target {target}: got {r}, oracle {first_best}");
    }
    Ok("576 -> 6, 200 cases match exhaustive search".into())
}

fn bootstrap() -> Check {
    let perfect = PredictionSet::new(vec![0, 1, 2, 1, 0], vec![0, 1, 2, 1, 0], 3).unwrap();
    let r = bootstrap_se(&perfect, Metric::Accuracy, 2000, 1, false).unwrap();
    ensure!(r.se == 0.0, "all-correct SE {}", r.se);

    let truth: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let pred: Vec<usize> = truth.iter().enumerate().map(|(i, &t)| if i % 5 == 0 { 1 - t } else { t }).collect();
    let p = PredictionSet::new(truth, pred, 2).unwrap();
    let analytic = (0.8f64 * 0.2 / 200.0).sqrt();
    let a = bootstrap_se(&p, Metric::Accuracy, 2000, 2024, false).unwrap();
    ensure!((a.se - analytic).abs() <= 0.15 * analytic, "SE {} vs {analytic}", a.se);
    let b = bootstrap_se(&p, Metric::Accuracy, 2000, 2024, false).unwrap();
    ensure!(a.se.to_bits() == b.se.to_bits(), "repeat run differs");
    Ok(format!("SE {:.4} vs analytic {analytic:.4}, repeat bit-identical", a.se))
}

fn classification() -> Check {
    let r = classification_report(&PredictionSet::new(vec![0, 0, 1, 1], vec![0, 1, 1, 1], 2).unwrap());
    let (a, b) = (&r.per_class[0], &r.per_class[1]);
    ensure!(a.precision == 1.0 && a.recall == 0.5, "class 0 P {} R {}", a.precision, a.recall);
    ensure!((a.f1 - 2.0 / 3.0).abs() < 1e-15, "class 0 F1 {}", a.f1);
    ensure!((b.precision - 2.0 / 3.0).abs() < 1e-15 && b.recall == 1.0, "class 1 P {} R {}", b.precision, b.recall);
    ensure!((b.f1 - 0.8).abs() < 1e-15, "class 1 F1 {}", b.f1);
    ensure!(r.accuracy == 0.75, "accuracy {}", r.accuracy);

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for i in 0..100 {
        let (n, k) = (rng.random_range(1..=80), rng.random_range(2..=6));
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count() as f64 / n as f64;
        let r = classification_report(&PredictionSet::new(truth, pred, k).unwrap());
        ensure!((r.weighted_recall - correct).abs() < 1e-12, "set {i}: weighted recall {} vs {correct}", r.weighted_recall);
        ensure!(r.accuracy == correct, "set {i}: accuracy {} vs {correct}", r.accuracy);
    }
    Ok("4-sample example exact, weighted recall = accuracy on 100 sets".into())
}

fn pareto_sweep() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("m");
    let gen = bin()
        .args(["gen", "--channels", "3,8,12,16", "--size", "12", "--seed", "7", "--out"])
        .arg(&model)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(gen.status.success(), "gen failed");
    let csv = dir.path().join("sweep.csv");
    let sweep = bin()
        .args(["sweep", "--model"])
        .arg(model.join("model.json"))
        .args([
            "--spatial-clusters", "1,2,3", "--channel-clusters", "1,2,3", "--tau", "0.8,0.9,1.0", "--rmax", "4,inf",
            "--superpixels", "12", "--seed", "3", "--out",
        ])
        .arg(&csv)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(sweep.status.success(), "sweep failed: {}", String::from_utf8_lossy(&sweep.stderr));

    let rows = read_sweep(&csv)?;
    ensure!(rows.len() == 54, "{} rows", rows.len());
    for (i, a) in rows.iter().enumerate() {
        let dominated = rows.iter().any(|b| b.1 <= a.1 && b.2 <= a.2 && (b.1 < a.1 || b.2 < a.2));
        ensure!(a.3 != dominated, "row {i} flagged {} but dominated = {dominated}", a.3);
    }
    let anchor = rows.iter().any(|r| r.0 == ("1".into(), "inf".into()) && r.1 == 0.0 && r.3);
    ensure!(anchor, "no Pareto row at tau 1, r_max inf with zero error");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(120), "took {t:?}");
    let front = rows.iter().filter(|r| r.3).count();
    Ok(format!("54 rows, {front} on the front, lossless anchor present, {:.2} s", t.as_secs_f64()))
}

/// ((tau, r_max), error, flops, pareto) per row.
fn read_sweep(path: &Path) -> Result<Vec<((String, String), f64, u64, bool)>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("missing column {name}"));
    let (tau, rmax, err, flops, pareto) = (col("tau")?, col("r_max")?, col("error")?, col("flops_comp")?, col("pareto")?);
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let tau_v: f64 = r[tau].parse().map_err(|_| "tau".to_string())?;
            Ok((
                (tau_v.to_string(), r[rmax].to_string()),
                r[err].parse().map_err(|_| "error".to_string())?,
                r[flops].parse().map_err(|_| "flops".to_string())?,
                r[pareto].parse().map_err(|_| "pareto".to_string())?,
            ))
        })
        .collect()
}

fn baseline_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for i in 0..10 {
        let (c_out, c_in) = (rng.random_range(2..=16), rng.random_range(1..=4));
        let w = random_layer(&mut rng, c_out, c_in, 3, 1, 1);
        let f = random_features(&mut rng, c_out, 6, 6);
        let policy = RankPolicy::uncapped(rng.random_range(0.5..1.0)).unwrap();
        let h = compress_hierarchical(&w, &f, &HierarchyConfig::new(6, 1, 1, i), &policy).map_err(|e| e.to_string())?;
        let hc = h.layer.clusters();
        ensure!(hc.len() == 1, "layer {i}: {} clusters", hc.len());
        let g = compress_global_svd(&w, hc[0].rank()).unwrap();
        let gc = &g.clusters()[0];
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure!(gc.channel_indices == hc[0].channel_indices, "layer {i}: channel order differs");
        ensure!(bits(&gc.factors.u) == bits(&hc[0].factors.u), "layer {i}: U differs");
        ensure!(bits(&gc.factors.v) == bits(&hc[0].factors.v), "layer {i}: V differs");
        let s = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure!(s(&gc.factors.sigma) == s(&hc[0].factors.sigma), "layer {i}: sigma differs");
    }
    Ok("10 layers, factors bit-identical".into())
}

/// `Σ_{a,b} G[a,b,i,j]·U1[o,a]·U2[c,b]`, looped.
fn tucker_oracle(core: &Tensor, u1: &Matrix, u2: &Matrix, k: usize) -> Vec<f64> {
    let (ro, ri) = (u1.cols(), u2.cols());
    let (co, ci) = (u1.rows(), u2.rows());
    let g = core.data();
    let mut out = vec![0.0; co * ci * k * k];
    for o in 0..co {
        for c in 0..ci {
            for t in 0..k * k {
                let mut acc = 0.0;
                for a in 0..ro {
                    for b in 0..ri {
                        acc += g[(a * ri + b) * k * k + t] * u1[(o, a)] * u2[(c, b)];
                    }
                }
                out[(o * ci + c) * k * k + t] = acc;
            }
        }
    }
    out
}

fn tucker() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let mut worst_full: f64 = 0.0;
    for i in 0..10 {
        let (co, ci, k) = (rng.random_range(2..=8), rng.random_range(1..=5), [1, 3][i % 2]);
        let w = random_layer(&mut rng, co, ci, k, 1, 0);
        let err = |ro: usize, ri: usize| -> Result<f64, String> {
            let t = tucker2(&w, ro, ri).map_err(|e| e.to_string())?;
            Ok(rel_diff(&tucker_oracle(&t.core, &t.u1, &t.u2, k), w.weights().data()))
        };
        worst_full = worst_full.max(err(co, ci)?);
        let mut grid = vec![vec![0.0; ci + 1]; co + 1];
        for ro in 1..=co {
            for ri in 1..=ci {
                grid[ro][ri] = err(ro, ri)?;
                if ro > 1 {
                    ensure!(grid[ro][ri] <= grid[ro - 1][ri] + 1e-12, "tensor {i}: error rose at ({ro}, {ri})");
                }
                if ri > 1 {
                    ensure!(grid[ro][ri] <= grid[ro][ri - 1] + 1e-12, "tensor {i}: error rose at ({ro}, {ri})");
                }
            }
        }
    }
    ensure!(worst_full <= 1e-8, "full-rank error {worst_full:.2e}");
    Ok(format!("10 tensors, full-rank error {worst_full:.1e}, monotone grid"))
}

fn main() {
    let checks: [(&str, fn() -> Check); 12] = [
        ("eckart-young identity", eckart_young),
        ("lossless round trip", lossless_round_trip),
        ("rank selection", rank_selection),
        ("partition invariants", partition_invariants),
        ("planted co-activation recovery", planted_coactivation),
        ("cost formulas", cost_formulas),
        ("budget mapping", budget_mapping),
        ("bootstrap", bootstrap),
        ("classification report", classification),
        ("pareto sweep", pareto_sweep),
        ("baseline equivalence", baseline_equivalence),
        ("tucker-2", tucker),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
