//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 verification failure, 4 data or format
//! error. Reports go to stdout as JSON; warnings go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::clustering::HierarchyConfig;
use crate::compress::{
    compress_global_svd, compress_hierarchical, compress_tucker2, factored_forward, rank_for_budget,
    reconstruct_weights, CompressedLayer, Method,
};
use crate::conv::{conv2d_forward, im2col};
use crate::error::Error;
use crate::gen::{generate, GenConfig};
use crate::io::{load_archive, load_model, read_predictions, save_archive, Archive, ArchivedLayer, Hyper, Model};
use crate::linalg::RankPolicy;
use crate::metrics::{bootstrap_se, cost_report, format_pm, measure_latency, Metric};
use crate::rng::derive_seed;
use crate::sweep::{run_sweep, write_sweep_csv, SweepGrid, SweepLayer};
use crate::tensor::Tensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "clusvd", version, about = "Clustered low-rank compression of convolutional layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic model fixture.
    Gen(GenArgs),
    /// Compress every layer of a model into an archive.
    Compress(CompressArgs),
    /// Check an archive against its source model.
    Verify(VerifyArgs),
    /// Parameter, FLOPs and optional latency report for an archive.
    Report(ReportArgs),
    /// Bootstrap standard error of a classification metric.
    Bootstrap(BootstrapArgs),
    /// Evaluate a grid of hierarchical settings and mark the Pareto front.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Channel counts along the chain, input first.
    #[arg(long, value_delimiter = ',', default_value = "3,8,16")]
    channels: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    /// Input height and width.
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Defaults to kernel / 2.
    #[arg(long)]
    padding: Option<usize>,
    /// Calibration samples per layer.
    #[arg(long, default_value_t = 2)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Make every weight matrix exactly this rank.
    #[arg(long)]
    planted_rank: Option<usize>,
    /// Make activations consist of this many identical channel groups.
    #[arg(long)]
    groups: Option<usize>,
}

/// Rank cap; `inf` leaves it unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RankCap(Option<usize>);

fn parse_rmax(s: &str) -> Result<RankCap, String> {
    match s {
        "inf" | "none" => Ok(RankCap(None)),
        _ => match s.parse::<usize>() {
            Ok(0) => Err("rank cap must be at least 1".into()),
            Ok(v) => Ok(RankCap(Some(v))),
            Err(e) => Err(format!("'{s}': {e} (use an integer or 'inf')")),
        },
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s.parse::<Method>() {
        Ok(Method::Dense) | Err(_) => Err(format!("'{s}': expected hierarchical, global-svd or tucker2")),
        Ok(m) => Ok(m),
    }
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Model manifest.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_method, default_value = "hierarchical")]
    method: Method,
    /// Energy threshold for hierarchical rank selection.
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Rank cap for hierarchical compression, or 'inf'.
    #[arg(long, value_parser = parse_rmax, default_value = "inf")]
    rmax: RankCap,
    #[arg(long, default_value_t = 16)]
    superpixels: usize,
    #[arg(long, default_value_t = 2)]
    spatial_clusters: usize,
    #[arg(long, default_value_t = 2)]
    channel_clusters: usize,
    /// Target compression ratio per layer for the baselines.
    #[arg(long, default_value_t = 3.0)]
    budget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Archive directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// `(C_in, H, W)` input; defaults to the manifest's input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fail when any layer's relative weight error exceeds this.
    #[arg(long)]
    max_weight_error: Option<f64>,
    /// Allowed relative gap between factored and dense-reconstructed forward.
    #[arg(long, default_value_t = 1e-6)]
    forward_tol: f64,
    /// Allowed deviation of stored factors from orthonormality.
    #[arg(long, default_value_t = 1e-4)]
    ortho_tol: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Also time dense against factored forward passes.
    #[arg(long)]
    latency: bool,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    /// Input for latency runs; defaults to the manifest's input.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    /// CSV with header `true,pred` and zero-based labels.
    #[arg(long)]
    predictions: PathBuf,
    /// Replicate count.
    #[arg(long = "B", visible_alias = "b", default_value_t = 2000)]
    b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "accuracy", value_parser = |s: &str| s.parse::<Metric>().map_err(|e| e.to_string()))]
    metric: Metric,
    /// Class count; inferred from the labels when absent.
    #[arg(long)]
    classes: Option<usize>,
    /// Include every replicate value in the output.
    #[arg(long)]
    keep_replicates: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    spatial_clusters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    channel_clusters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.9,1.0")]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_rmax, default_value = "4,inf")]
    rmax: Vec<RankCap>,
    #[arg(long, default_value_t = 16)]
    superpixels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parameter(_) | Error::Shape(_) => EXIT_USAGE,
            Error::Format { .. } | Error::Data(_) | Error::Io { .. } | Error::Numeric(_) => EXIT_DATA,
        };
        Failure { code, msg: e.to_string() }
    }
}

type CmdResult = Result<i32, Failure>;

fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let cfg = GenConfig {
        channels: a.channels,
        kernel: a.kernel,
        size: a.size,
        stride: a.stride,
        padding: a.padding,
        batch: a.batch,
        seed: a.seed,
        planted_rank: a.planted_rank,
        groups: a.groups,
    };
    let manifest = generate(&a.out, &cfg)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        model: PathBuf,
        config: &'a GenConfig,
        layers: usize,
    }
    print_json(&Summary {
        model: a.out.join("model.json"),
        config: &cfg,
        layers: manifest.layers.len(),
    });
    Ok(EXIT_OK)
}

fn output_dims(model: &Model) -> Result<Vec<(usize, usize)>, Failure> {
    model
        .layers
        .iter()
        .map(|l| {
            l.output_dims
                .ok_or_else(|| usage(format!("layer '{}' has no output dims and the model has no input", l.name)))
        })
        .collect()
}

fn cmd_compress(a: CompressArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let hw = output_dims(&model)?;
    if a.method != Method::Hierarchical && !(a.budget >= 1.0 && a.budget.is_finite()) {
        return Err(usage(format!("budget ratio {} must be a finite value ≥ 1", a.budget)));
    }
    let policy = match a.rmax.0 {
        Some(r) => RankPolicy::new(a.tau, r),
        None => RankPolicy::uncapped(a.tau),
    };

    let mut layers = Vec::with_capacity(model.layers.len());
    for (i, l) in model.layers.iter().enumerate() {
        let w = &l.weights;
        let target = (w.c_out() * w.row_len()) as f64 / a.budget;
        let mut warnings = Vec::new();
        let layer = match a.method {
            Method::Hierarchical => {
                let f = l
                    .activation
                    .as_ref()
                    .ok_or_else(|| usage(format!("hierarchical compression needs activations for layer '{}'", l.name)))?;
                let cfg = HierarchyConfig::new(
                    a.superpixels,
                    a.spatial_clusters,
                    a.channel_clusters,
                    derive_seed(a.seed, i as u64),
                );
                let out = compress_hierarchical(w, f, &cfg, policy.as_ref().map_err(|e| usage(e.to_string()))?)?;
                warnings.extend(out.model.warnings.iter().cloned());
                out.layer
            }
            Method::GlobalSvd => {
                let r = rank_for_budget(w.c_out(), w.c_in(), w.kernel(), target);
                if r.infeasible {
                    warnings.push(format!("target {target:.1} parameters is below rank 1; using rank 1"));
                }
                compress_global_svd(w, r.rank)?
            }
            Method::Tucker2 => {
                let (layer, choice) = compress_tucker2(w, target)?;
                if choice.infeasible {
                    warnings.push(format!("target {target:.1} parameters is below ranks (1, 1); using them"));
                }
                layer
            }
            Method::Dense => CompressedLayer::dense(w),
        };
        for msg in &warnings {
            warn(&format!("{}: {msg}", l.name));
        }
        layers.push(ArchivedLayer { name: l.name.clone(), layer, warnings });
    }

    let hyper = match a.method {
        Method::Hierarchical => Hyper {
            tau: Some(a.tau),
            r_max: a.rmax.0,
            superpixels: Some(a.superpixels),
            spatial_clusters: Some(a.spatial_clusters),
            channel_clusters: Some(a.channel_clusters),
            seed: Some(a.seed),
            budget: None,
        },
        _ => Hyper { budget: Some(a.budget), ..Hyper::default() },
    };
    let archive = Archive { method: a.method, hyper, layers };
    save_archive(&a.out, &archive)?;

    let originals: Vec<_> = model.layers.iter().map(|l| l.weights.clone()).collect();
    let compressed: Vec<_> = archive.layers.iter().map(|l| l.layer.clone()).collect();
    print_json(&cost_report(&originals, &compressed, &hw, None)?);
    Ok(EXIT_OK)
}

fn relu(t: &Tensor) -> Tensor {
    Tensor::new(t.dims().to_vec(), t.data().iter().map(|v| v.max(0.0)).collect()).expect("same shape")
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[derive(Debug, Serialize)]
struct LayerCheck {
    name: String,
    method: Method,
    weight_rel_error: f64,
    /// Factored forward against the dense forward of the reconstructed weights.
    forward_rel_deviation: f64,
    forward_max_abs_deviation: f64,
    /// Factored forward against the dense forward of the original weights.
    output_deviation: f64,
    /// `‖ΔW‖_F · ‖patches‖_F`.
    output_bound: f64,
    violations: Vec<String>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    ok: bool,
    layers: Vec<LayerCheck>,
    failures: Vec<String>,
}

fn verify_fail(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_VERIFY, msg: msg.into() }
}

fn load_input(path: Option<&Path>, model: &Model) -> Result<Option<Tensor>, Failure> {
    match path {
        Some(p) => {
            let t = crate::io::read_tensor(p)?;
            match t.dims() {
                [_, _, _] => Ok(Some(t)),
                [1, c, h, w] => Ok(Some(Tensor::new(vec![*c, *h, *w], t.into_data())?)),
                d => Err(usage(format!("input must be (C, H, W), got {d:?}"))),
            }
        }
        None => Ok(model.input.clone()),
    }
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let archive = load_archive(&a.archive).map_err(|e| verify_fail(format!("archive unreadable: {e}")))?;
    let mut x = load_input(a.input.as_deref(), &model)?
        .ok_or_else(|| usage("no input tensor: pass --input or add one to the manifest"))?;
    if archive.layers.len() != model.layers.len() {
        return Err(verify_fail(format!(
            "archive has {} layers, model has {}",
            archive.layers.len(),
            model.layers.len()
        )));
    }

    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for (l, al) in model.layers.iter().zip(&archive.layers) {
        let (w, c) = (&l.weights, &al.layer);
        if (w.c_out(), w.c_in(), w.kernel(), w.stride(), w.padding()) != (c.c_out, c.c_in, c.kernel, c.stride, c.padding) {
            return Err(verify_fail(format!(
                "layer '{}': model is ({}, {}, {}, stride {}, pad {}), archive is ({}, {}, {}, stride {}, pad {})",
                l.name,
                w.c_out(),
                w.c_in(),
                w.kernel(),
                w.stride(),
                w.padding(),
                c.c_out,
                c.c_in,
                c.kernel,
                c.stride,
                c.padding
            )));
        }
        if x.dims()[0] != w.c_in() {
            return Err(verify_fail(format!(
                "layer '{}': input has {} channels, layer expects {}",
                l.name,
                x.dims()[0],
                w.c_in()
            )));
        }
        let violations = c.violations(a.ortho_tol);
        let rec = reconstruct_weights(c).map_err(|e| verify_fail(format!("layer '{}': {e}", l.name)))?;
        let dw = w.weights().diff_norm(rec.weights());
        let weight_rel_error = rel(dw, w.weights().frobenius_norm());

        let shape_fail = |e: Error| verify_fail(format!("layer '{}': {e}", l.name));
        let y_fact = factored_forward(c, &x).map_err(shape_fail)?;
        let y_rec = conv2d_forward(&x, &rec).map_err(shape_fail)?;
        let y_orig = conv2d_forward(&x, w).map_err(shape_fail)?;
        let forward_rel_deviation = rel(y_fact.diff_norm(&y_rec), y_rec.frobenius_norm());
        let output_deviation = y_fact.diff_norm(&y_orig);
        let patches = im2col(&x, w.kernel(), w.stride(), w.padding()).map_err(shape_fail)?;
        let output_bound = dw * patches.frobenius_norm();

        if forward_rel_deviation > a.forward_tol {
            failures.push(format!(
                "{}: factored forward deviates by {forward_rel_deviation:.3e} (tolerance {:.1e})",
                l.name, a.forward_tol
            ));
        }
        // Slack covers rounding in the two forward passes.
        let slack = 1e-9 * (y_orig.frobenius_norm() + output_bound);
        if output_deviation > output_bound + slack {
            failures.push(format!("{}: output deviation {output_deviation:.3e} exceeds bound {output_bound:.3e}", l.name));
        }
        if let Some(max) = a.max_weight_error {
            if weight_rel_error > max {
                failures.push(format!("{}: weight error {weight_rel_error:.3e} exceeds {max:.1e}", l.name));
            }
        }
        failures.extend(violations.iter().map(|v| format!("{}: {v}", l.name)));

        checks.push(LayerCheck {
            name: l.name.clone(),
            method: c.method,
            weight_rel_error,
            forward_rel_deviation,
            forward_max_abs_deviation: y_fact.max_abs_diff(&y_rec),
            output_deviation,
            output_bound,
            violations,
        });
        x = relu(&y_orig);
    }

    let ok = failures.is_empty();
    for f in &failures {
        eprintln!("failed: {f}");
    }
    print_json(&VerifyReport { ok, layers: checks, failures });
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_report(a: ReportArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let archive = load_archive(&a.archive)?;
    let hw = output_dims(&model)?;
    if archive.layers.len() != model.layers.len() {
        return Err(usage(format!(
            "archive has {} layers, model has {}",
            archive.layers.len(),
            model.layers.len()
        )));
    }
    let originals: Vec<_> = model.layers.iter().map(|l| l.weights.clone()).collect();
    let compressed: Vec<_> = archive.layers.iter().map(|l| l.layer.clone()).collect();

    let latency = if a.latency {
        let x = load_input(a.input.as_deref(), &model)?
            .ok_or_else(|| usage("latency needs an input tensor: pass --input or add one to the manifest"))?;
        // Both chains must run before timing so shape errors surface here.
        let dense = |x: &Tensor| -> crate::Result<Tensor> {
            originals.iter().try_fold(x.clone(), |x, w| conv2d_forward(&x, w).map(|y| relu(&y)))
        };
        let factored = |x: &Tensor| -> crate::Result<Tensor> {
            compressed.iter().try_fold(x.clone(), |x, c| factored_forward(c, &x).map(|y| relu(&y)))
        };
        dense(&x)?;
        factored(&x)?;
        Some(measure_latency(
            || {
                std::hint::black_box(dense(&x).expect("checked above"));
            },
            || {
                std::hint::black_box(factored(&x).expect("checked above"));
            },
            a.warmup,
            a.trials,
        )?)
    } else {
        None
    };
    print_json(&cost_report(&originals, &compressed, &hw, latency)?);
    Ok(EXIT_OK)
}

fn cmd_bootstrap(a: BootstrapArgs) -> CmdResult {
    let p = read_predictions(&a.predictions, a.classes)?;
    let r = bootstrap_se(&p, a.metric, a.b, a.seed, a.keep_replicates)?;
    #[derive(Serialize)]
    struct Out<'a> {
        samples: usize,
        classes: usize,
        #[serde(flatten)]
        result: &'a crate::metrics::BootstrapResult,
        display: String,
    }
    print_json(&Out {
        samples: p.len(),
        classes: p.classes(),
        result: &r,
        display: format_pm(r.theta_hat, r.se),
    });
    Ok(EXIT_OK)
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let hw = output_dims(&model)?;
    let layers = model
        .layers
        .iter()
        .zip(hw)
        .map(|(l, output_hw)| {
            let activation = l
                .activation
                .clone()
                .ok_or_else(|| usage(format!("sweep needs activations for layer '{}'", l.name)))?;
            Ok(SweepLayer { weights: l.weights.clone(), activation, output_hw })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let grid = SweepGrid {
        spatial_clusters: a.spatial_clusters,
        channel_clusters: a.channel_clusters,
        taus: a.tau,
        r_max: a.rmax.iter().map(|r| r.0).collect(),
    };
    let rows = run_sweep(&layers, &grid, a.superpixels, a.seed)?;
    write_sweep_csv(&a.out, &rows)?;
    #[derive(Serialize)]
    struct Out<'a> {
        csv: &'a Path,
        rows: usize,
        pareto: Vec<usize>,
    }
    print_json(&Out {
        csv: &a.out,
        rows: rows.len(),
        pareto: rows.iter().enumerate().filter(|(_, r)| r.pareto).map(|(i, _)| i).collect(),
    });
    Ok(EXIT_OK)
}
