//! Batch front end for the unit-rank tensor regression toolkit.
//!
//! Subcommands: `simulate | path | fit | cv | predict | bench`. Every run
//! writes its outputs plus a `run_manifest.json` recording the resolved
//! configuration, per-phase timings and SHA-256 digests of the emitted files.
//! Outputs are deterministic given (inputs, flags, seed); only the manifest's
//! timing fields vary between identical runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
//! (a solver run was flagged as truncated or unconverged).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use surf_core::acs::{acs_path, AcsConfig};
use surf_core::dataset::{load as load_dataset, save as save_dataset, TensorDataset};
use surf_core::deflate::{
    load_model, rmse, save_model, sequential_fit, sparsity_of_coefficients, CvConfig, SolverSpec,
};
use surf_core::error::CoreError;
use surf_core::path::{fmt_f64, write_path_csv, write_path_jsonl, PathPoint};
use surf_core::simulate::{gen_raw, SimSpec};
use surf_core::surf::{lambda_max, trace_path, SurfConfig};

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "surf",
    about = "Sparse unit-rank tensor regression toolkit",
    version
)]
struct Cli {
    /// RNG seed shared by data generation and cross-validation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for cross-validation folds.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Suppress progress output.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic benchmark dataset (plus optional holdout split).
    Simulate(SimulateArgs),
    /// Trace solution paths and export them as CSV / JSON-lines.
    Path(PathArgs),
    /// Fit a deflation model with cross-validated penalties.
    Fit(FitArgs),
    /// Cross-validate and report metrics without saving a model.
    Cv(FitArgs),
    /// Predict a dataset's responses with a fitted model.
    Predict(PredictArgs),
    /// Time solvers on synthetic instances.
    Bench(BenchArgs),
}

#[derive(Args, Serialize, Clone)]
struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    i: usize,
    #[arg(long, default_value_t = 50)]
    r: usize,
    #[arg(long, default_value_t = 80.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.6)]
    corr_base: f64,
    /// Grid order: 2 (I x I) or 3 (I x I x I).
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Hold out this many trailing samples as a raw test dataset.
    #[arg(long, default_value_t = 0)]
    holdout: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SolverArg {
    Surf,
    Acs,
    Both,
}

#[derive(Args, Serialize, Clone)]
struct PathArgs {
    /// Dataset directory or manifest path.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Surf)]
    solver: SolverArg,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Descent tolerance; defaults to epsilon^2 / 2.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Explicit comma-separated penalty grid for the ACS solver.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    grid_min_ratio: f64,
}

#[derive(Args, Serialize, Clone)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Surf)]
    solver: SolverArg,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    grid_min_ratio: f64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 50)]
    rank_cap: usize,
    /// Prefer the sparsest model within one standard error of the best.
    #[arg(long, default_value_t = false)]
    one_se: bool,
}

#[derive(Args, Serialize, Clone)]
struct PredictArgs {
    /// Model directory or manifest path.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Serialize, Clone)]
struct BenchArgs {
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 32)]
    i: usize,
    #[arg(long, default_value_t = 50)]
    r: usize,
    #[arg(long, default_value_t = 80.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    /// Solvers to time.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["surf".to_string(), "acs".to_string()])]
    solvers: Vec<String>,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
}

struct CliError {
    code: i32,
    msg: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    fn data(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            msg: msg.into(),
        }
    }

    fn numerical(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            msg: msg.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

/// Accumulates output files, digests and phase timings for the run manifest.
struct RunRecorder {
    out_dir: PathBuf,
    quiet: bool,
    started: Instant,
    started_unix_ms: u128,
    phases: BTreeMap<String, u128>,
    outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct OutputDigest {
    file: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    format: &'static str,
    subcommand: &'a str,
    seed: u64,
    threads: usize,
    config: serde_json::Value,
    started_unix_ms: u128,
    wall_ms: u128,
    phases: &'a BTreeMap<String, u128>,
    outputs: &'a [OutputDigest],
}

impl RunRecorder {
    fn new(out_dir: &Path, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            quiet,
            started: Instant::now(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            phases: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    fn phase<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let t0 = Instant::now();
        let out = f(self)?;
        let prev = self.phases.get(name).copied().unwrap_or(0);
        self.phases
            .insert(name.into(), prev + t0.elapsed().as_millis());
        Ok(out)
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.record_file(name)?;
        Ok(path)
    }

    /// Digests a file already written under the output directory.
    fn record_file(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        let bytes = fs::read(&path)?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.outputs.push(OutputDigest {
            file: name.into(),
            sha256: hex,
            bytes: bytes.len(),
        });
        if !self.quiet {
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    fn finish(
        &self,
        subcommand: &str,
        seed: u64,
        threads: usize,
        config: serde_json::Value,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            format: "surf-run-v1",
            subcommand,
            seed,
            threads,
            config,
            started_unix_ms: self.started_unix_ms,
            wall_ms: self.started.elapsed().as_millis(),
            phases: &self.phases,
            outputs: &self.outputs,
        };
        let text =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))?;
        fs::write(self.out_dir.join("run_manifest.json"), text)?;
        Ok(())
    }
}

fn surf_config(epsilon: f64, xi: Option<f64>, alpha: f64, max_steps: Option<usize>) -> SurfConfig {
    let mut cfg = SurfConfig::new(epsilon);
    if let Some(xi) = xi {
        cfg.xi = xi;
    }
    cfg.alpha = alpha;
    cfg.max_steps = max_steps;
    cfg
}

fn acs_config(
    alpha: f64,
    grid: Option<&[f64]>,
    grid_size: usize,
    grid_min_ratio: f64,
    lmax: f64,
) -> AcsConfig {
    let lambda_grid = match grid {
        Some(g) => g.to_vec(),
        None => surf_core::acs::log_grid(lmax, grid_min_ratio, grid_size),
    };
    AcsConfig {
        alpha,
        lambda_grid,
        ..AcsConfig::default()
    }
}

fn validate_usage(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::usage(msg.to_string()))
    }
}

fn cmd_simulate(args: &SimulateArgs, rec: &mut RunRecorder, seed: u64) -> Result<(), CliError> {
    let mut spec = SimSpec::new(args.m + args.holdout, args.i, args.r, args.s, seed);
    spec.noise_sd = args.noise_sd;
    spec.correlation_base = args.corr_base;
    spec.order = args.order;
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    validate_usage(
        args.holdout == 0 || args.m >= 2,
        "--m must stay >= 2 with a holdout",
    )?;

    let (raw, truth) = rec.phase("generate", |_| Ok(gen_raw(&spec)?))?;
    rec.phase("write", |rec| {
        let truth_json =
            serde_json::to_vec_pretty(&truth).map_err(|e| CliError::data(e.to_string()))?;
        rec.write_file("truth.json", &truth_json)?;
        if args.holdout == 0 {
            let ds = surf_core::dataset::standardize(&raw.x, &raw.y)?;
            save_dataset(&ds, &rec.out_dir)?;
            for f in ["dataset.json", "x.f64", "y.f64", "std.f64"] {
                rec.record_file(f)?;
            }
        } else {
            let (train, test) = raw.split(args.m)?;
            let ds = surf_core::dataset::standardize(&train.x, &train.y)?;
            save_dataset(&ds, &rec.out_dir.join("train"))?;
            for f in [
                "train/dataset.json",
                "train/x.f64",
                "train/y.f64",
                "train/std.f64",
            ] {
                rec.record_file(f)?;
            }
            // Holdout stays raw so prediction standardizes it with the
            // model's own record.
            write_raw_dataset(&rec.out_dir.join("test"), &test.x, &test.y)?;
            for f in ["test/dataset.json", "test/x.f64", "test/y.f64"] {
                rec.record_file(f)?;
            }
        }
        Ok(())
    })
}

/// Writes a raw (standardized: false) surf-ds-v1 dataset.
fn write_raw_dataset(
    dir: &Path,
    x: &surf_core::tensor::DenseTensor,
    y: &[f64],
) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let m = *x.shape().last().unwrap();
    let entries = x.len() / m;
    let mut sample_major = vec![0.0; x.len()];
    for e in 0..entries {
        for s in 0..m {
            sample_major[s * entries + e] = x.values()[e * m + s];
        }
    }
    let mut xb = Vec::with_capacity(sample_major.len() * 8);
    for v in &sample_major {
        xb.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join("x.f64"), xb)?;
    let mut yb = Vec::with_capacity(y.len() * 8);
    for v in y {
        yb.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join("y.f64"), yb)?;
    let manifest = serde_json::json!({
        "format": "surf-ds-v1",
        "shape": x.shape()[..x.order() - 1],
        "m": m,
        "x_file": "x.f64",
        "y_file": "y.f64",
        "layout": "row-major",
        "standardized": false,
    });
    fs::write(
        dir.join("dataset.json"),
        serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::data(e.to_string()))?,
    )?;
    Ok(())
}

fn cmd_path(args: &PathArgs, rec: &mut RunRecorder) -> Result<(), CliError> {
    let ds = rec.phase("load", |_| Ok(load_dataset(&args.data)?))?;
    let n_modes = ds.entry_shape().len();
    let mut flagged = false;

    let surf_cfg = surf_config(args.epsilon, args.xi, args.alpha, args.max_steps);
    surf_cfg
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let lmax = lambda_max(&ds);

    let mut surf_points: Option<Vec<PathPoint>> = None;
    if matches!(args.solver, SolverArg::Surf | SolverArg::Both) {
        let path = rec.phase("solve_surf", |_| Ok(trace_path(&ds, &surf_cfg)?))?;
        flagged |= path.truncated;
        export_points(rec, "path_surf", &path.points, n_modes)?;
        surf_points = Some(path.points);
    }
    if matches!(args.solver, SolverArg::Acs | SolverArg::Both) {
        let acs_cfg = acs_config(
            args.alpha,
            args.lambda_grid.as_deref(),
            args.grid_size,
            args.grid_min_ratio,
            lmax,
        );
        acs_cfg
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if acs_cfg.lambda_grid.is_empty() {
            // Degenerate zero-response dataset: no positive grid exists.
            export_points(rec, "path_acs", &[], n_modes)?;
        } else {
            let path = rec.phase("solve_acs", |_| Ok(acs_path(&ds, &acs_cfg)?))?;
            flagged |= !path.converged;
            let points = path.to_path_points(&ds, args.alpha)?;
            export_points(rec, "path_acs", &points, n_modes)?;

            if let Some(surf_points) = &surf_points {
                // Matched-lambda comparison at the stagewise path's distinct
                // penalties, ACS warm-started down the same sequence.
                let traced = surf_core::path::TracedPath {
                    points: surf_points.clone(),
                    truncated: false,
                    forward_steps: 0,
                    backward_steps: 0,
                };
                let lambdas = traced.distinct_lambdas();
                if !lambdas.is_empty() {
                    let mut cmp_cfg = acs_cfg.clone();
                    cmp_cfg.lambda_grid = lambdas.clone();
                    let cmp = rec.phase("solve_acs_matched", |_| Ok(acs_path(&ds, &cmp_cfg)?))?;
                    flagged |= !cmp.converged;
                    let mut csv = String::from("lambda,w_dist_f,surf_sigma,acs_sigma\n");
                    for (k, &l) in lambdas.iter().enumerate() {
                        let surf_term = traced.solution_at(l, ds.entry_shape());
                        let ws = surf_term.materialize()?;
                        let wa = cmp.points[k].term.materialize()?;
                        let dist = ws
                            .values()
                            .iter()
                            .zip(wa.values())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        let _ = writeln!(
                            csv,
                            "{},{},{},{}",
                            fmt_f64(l),
                            fmt_f64(dist),
                            fmt_f64(surf_term.sigma),
                            fmt_f64(cmp.points[k].term.sigma)
                        );
                    }
                    rec.write_file("compare.csv", csv.as_bytes())?;
                }
            }
        }
    }
    if flagged {
        return Err(CliError::numerical(
            "a solver run was truncated or failed to converge; outputs were written",
        ));
    }
    Ok(())
}

fn export_points(
    rec: &mut RunRecorder,
    stem: &str,
    points: &[PathPoint],
    n_modes: usize,
) -> Result<(), CliError> {
    let mut csv = Vec::new();
    write_path_csv(points, n_modes, &mut csv)?;
    rec.write_file(&format!("{stem}.csv"), &csv)?;
    let mut jsonl = Vec::new();
    write_path_jsonl(points, &mut jsonl)?;
    rec.write_file(&format!("{stem}.jsonl"), &jsonl)?;
    Ok(())
}

fn build_solver(args: &FitArgs, ds: &TensorDataset) -> Result<SolverSpec, CliError> {
    match args.solver {
        SolverArg::Surf => {
            let cfg = surf_config(args.epsilon, args.xi, args.alpha, args.max_steps);
            cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
            Ok(SolverSpec::Surf(cfg))
        }
        SolverArg::Acs => {
            let cfg = acs_config(
                args.alpha,
                args.lambda_grid.as_deref(),
                args.grid_size,
                args.grid_min_ratio,
                lambda_max(ds),
            );
            cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
            Ok(SolverSpec::Acs(cfg))
        }
        SolverArg::Both => Err(CliError::usage(
            "fit/cv take --solver surf or acs".to_string(),
        )),
    }
}

#[derive(Serialize)]
struct MetricsReport {
    format: &'static str,
    solver: String,
    rank: usize,
    null_rmse: f64,
    cv_rmse: f64,
    training_rmse: f64,
    rmse: f64,
    sparsity_of_coefficients: f64,
    terms: Vec<TermReport>,
}

#[derive(Serialize)]
struct TermReport {
    term_index: usize,
    lambda: f64,
    cv_rmse: f64,
}

fn fit_and_report(
    args: &FitArgs,
    rec: &mut RunRecorder,
    seed: u64,
    threads: usize,
    save: bool,
) -> Result<(), CliError> {
    let ds = rec.phase("load", |_| Ok(load_dataset(&args.data)?))?;
    let solver = build_solver(args, &ds)?;
    let cv = CvConfig {
        folds: args.folds,
        rank_cap: args.rank_cap,
        one_se_rule: args.one_se,
        seed,
    };
    cv.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let model = rec.phase("fit", |_| Ok(sequential_fit(&ds, &solver, &cv, threads)?))?;

    rec.phase("write", |rec| {
        if save {
            save_model(&model, &rec.out_dir)?;
            rec.record_file("model.json")?;
            rec.record_file("model_std.f64")?;
        }
        let preds = model.predict_standardized(ds.x())?;
        let y_mean = model.standardization.y_mean;
        let actual: Vec<f64> = ds.y().iter().map(|v| v + y_mean).collect();
        let training_rmse = rmse(&actual, &preds);
        let cv_rmse = model
            .selection
            .last()
            .map(|s| s.cv_rmse)
            .unwrap_or(model.null_rmse);
        let report = MetricsReport {
            format: "surf-metrics-v1",
            solver: solver.name().into(),
            rank: model.rank(),
            null_rmse: model.null_rmse,
            cv_rmse,
            training_rmse,
            rmse: cv_rmse,
            sparsity_of_coefficients: sparsity_of_coefficients(&model)?,
            terms: model
                .selection
                .iter()
                .map(|s| TermReport {
                    term_index: s.term_index,
                    lambda: s.lambda,
                    cv_rmse: s.cv_rmse,
                })
                .collect(),
        };
        let bytes =
            serde_json::to_vec_pretty(&report).map_err(|e| CliError::data(e.to_string()))?;
        rec.write_file("metrics.json", &bytes)?;
        Ok(())
    })?;
    if model.flags.flagged_runs > 0 {
        return Err(CliError::numerical(format!(
            "{} solver runs were flagged (truncated or unconverged); outputs were written",
            model.flags.flagged_runs
        )));
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs, rec: &mut RunRecorder) -> Result<(), CliError> {
    let model = rec.phase("load", |_| Ok(load_model(&args.model)?))?;
    let ds = rec.phase("load", |_| Ok(load_dataset(&args.data)?))?;
    // Reconstruct raw samples from the file's own record, then let the model
    // standardize them with its training record.
    let raw = ds.std().invert_stacked(ds.x())?;
    let preds = rec.phase("predict", |_| Ok(model.predict(&raw)?))?;
    let mut csv = String::from("sample,prediction\n");
    for (i, p) in preds.iter().enumerate() {
        let _ = writeln!(csv, "{i},{}", fmt_f64(*p));
    }
    rec.phase("write", |rec| {
        rec.write_file("predictions.csv", csv.as_bytes())?;
        Ok(())
    })
}

fn cmd_bench(args: &BenchArgs, rec: &mut RunRecorder, seed: u64) -> Result<(), CliError> {
    validate_usage(args.runs >= 1, "--runs must be >= 1")?;
    for s in &args.solvers {
        validate_usage(
            s == "surf" || s == "acs",
            "--solvers entries must be surf or acs",
        )?;
    }
    let mut spec = SimSpec::new(args.m, args.i, args.r, args.s, seed);
    spec.noise_sd = args.noise_sd;
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let (ds, _) = rec.phase("generate", |_| Ok(surf_core::simulate::gen_dataset(&spec)?))?;
    let lmax = lambda_max(&ds);

    let mut flagged = false;
    let mut csv = String::from("solver,run,wall_ms,iterations,per_iter_ms\n");
    for solver in &args.solvers {
        for run in 0..args.runs {
            let t0 = Instant::now();
            let iterations: usize = match solver.as_str() {
                "surf" => {
                    let cfg = surf_config(args.epsilon, None, args.alpha, None);
                    let path = trace_path(&ds, &cfg)?;
                    flagged |= path.truncated;
                    path.forward_steps + path.backward_steps
                }
                _ => {
                    let cfg = acs_config(args.alpha, None, args.grid_size, 1e-3, lmax);
                    let path = acs_path(&ds, &cfg)?;
                    flagged |= !path.converged;
                    path.total_block_solves
                }
            };
            let wall = t0.elapsed().as_secs_f64() * 1e3;
            let per_iter = wall / iterations.max(1) as f64;
            let _ = writeln!(
                csv,
                "{solver},{run},{},{iterations},{}",
                fmt_f64(wall),
                fmt_f64(per_iter)
            );
        }
    }
    rec.phase("write", |rec| {
        rec.write_file("bench.csv", csv.as_bytes())?;
        Ok(())
    })?;
    if flagged {
        return Err(CliError::numerical(
            "a timed solver run was flagged; bench.csv was written".to_string(),
        ));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut rec = RunRecorder::new(&cli.out, cli.quiet)?;
    let (name, config) = match &cli.cmd {
        Cmd::Simulate(a) => ("simulate", serde_json::to_value(a)),
        Cmd::Path(a) => ("path", serde_json::to_value(a)),
        Cmd::Fit(a) => ("fit", serde_json::to_value(a)),
        Cmd::Cv(a) => ("cv", serde_json::to_value(a)),
        Cmd::Predict(a) => ("predict", serde_json::to_value(a)),
        Cmd::Bench(a) => ("bench", serde_json::to_value(a)),
    };
    let config = config.map_err(|e| CliError::data(e.to_string()))?;

    let result = match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a, &mut rec, cli.seed),
        Cmd::Path(a) => cmd_path(a, &mut rec),
        Cmd::Fit(a) => fit_and_report(a, &mut rec, cli.seed, cli.threads, true),
        Cmd::Cv(a) => fit_and_report(a, &mut rec, cli.seed, cli.threads, false),
        Cmd::Predict(a) => cmd_predict(a, &mut rec),
        Cmd::Bench(a) => cmd_bench(a, &mut rec, cli.seed),
    };
    // The manifest is written even for flagged (exit 3) runs.
    match &result {
        Ok(()) => rec.finish(name, cli.seed, cli.threads, config)?,
        Err(e) if e.code == EXIT_NUMERICAL => rec.finish(name, cli.seed, cli.threads, config)?,
        Err(_) => {}
    }
    result
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success.
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(EXIT_USAGE);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.msg);
        std::process::exit(e.code);
    }
}
