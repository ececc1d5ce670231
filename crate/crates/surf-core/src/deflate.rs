//! Sequential unit-rank pursue: fit a sparse rank-1 term on the current
//! response residual, deflate, repeat. The penalty for each term is chosen by
//! k-fold cross-validation over that term's solution path (larger penalty on
//! ties, optional one-standard-error rule) and a term is kept only while the
//! cumulative CV error keeps improving. The accepted terms, their selection
//! metadata and the training standardization record form the deployable
//! model, persisted as a `surf-model-v1` JSON manifest next to a binary
//! standardization sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acs::{acs_path, AcsConfig};
use crate::dataset::{read_f64s_exact, write_f64s, StandardizationRecord, TensorDataset};
use crate::error::{CoreError, Result};
use crate::surf::{trace_path, SurfConfig};
use crate::tensor::{cp_sum, predict_samples, DenseTensor, UnitRankTerm};

pub const MODEL_FORMAT: &str = "surf-model-v1";

/// Minimum CV RMSE improvement for a term to be accepted.
const CV_IMPROVEMENT_TOL: f64 = 1e-6;

/// Cross-validation controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub rank_cap: usize,
    pub one_se_rule: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            rank_cap: 50,
            one_se_rule: false,
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.rank_cap < 1 {
            return Err(CoreError::InvalidArgument("rank_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which solver drives each unit-rank fit.
#[derive(Debug, Clone)]
pub enum SolverSpec {
    Surf(SurfConfig),
    Acs(AcsConfig),
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::Surf(_) => "surf",
            SolverSpec::Acs(_) => "acs",
        }
    }
}

/// One row of a CV table: candidate penalty and its pooled CV error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvEntry {
    pub lambda: f64,
    pub cv_mse: f64,
    /// Standard error of the per-fold MSEs.
    pub se: f64,
}

/// Selection metadata for one accepted term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSelection {
    pub term_index: usize,
    pub lambda: f64,
    /// CV RMSE of the cumulative model including this term.
    pub cv_rmse: f64,
    pub solver: String,
    pub cv_table: Vec<CvEntry>,
}

/// Solver health counters carried out of a fit for CLI exit codes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Solver runs (full-data or fold) that hit a step cap or returned
    /// without converging.
    pub flagged_runs: usize,
}

/// Ordered unit-rank terms plus everything needed to predict on raw data.
#[derive(Debug, Clone)]
pub struct CPModel {
    pub terms: Vec<UnitRankTerm>,
    pub standardization: StandardizationRecord,
    pub selection: Vec<TermSelection>,
    /// CV RMSE of the null (mean-only) model, the rank-0 baseline.
    pub null_rmse: f64,
    pub flags: FitFlags,
}

impl CPModel {
    pub fn entry_shape(&self) -> &[usize] {
        self.standardization.entry_shape()
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// Materialized coefficient tensor, the sum of all terms.
    pub fn coefficient(&self) -> Result<DenseTensor> {
        cp_sum(&self.terms, self.entry_shape())
    }

    /// Predictions for raw (unstandardized) stacked samples: standardize with
    /// the stored record, contract, add back the response mean.
    pub fn predict(&self, raw_x: &DenseTensor) -> Result<Vec<f64>> {
        if raw_x.values().iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "non-finite values in prediction input".into(),
            ));
        }
        let x = self.standardization.apply_stacked(raw_x)?;
        self.predict_standardized(&x)
    }

    /// Predictions for samples already on the model's standardized scale.
    pub fn predict_standardized(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        let m = *x.shape().last().unwrap();
        let mut out = vec![self.standardization.y_mean; m];
        for term in &self.terms {
            let p = predict_samples(x, term)?;
            for (o, v) in out.iter_mut().zip(&p) {
                *o += v;
            }
        }
        Ok(out)
    }
}

/// Root mean squared prediction error.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> f64 {
    assert_eq!(y_true.len(), y_pred.len());
    let n = y_true.len().max(1) as f64;
    (y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Fraction of exactly-zero entries in the materialized coefficient.
pub fn sparsity_of_coefficients(model: &CPModel) -> Result<f64> {
    let w = model.coefficient()?;
    let zeros = w.values().iter().filter(|&&v| v == 0.0).count();
    Ok(zeros as f64 / w.len() as f64)
}

/// Subtracts a term's predictions on the standardized predictors from the
/// current residual response.
pub fn residualize(
    y_current: &[f64],
    term: &UnitRankTerm,
    dataset: &TensorDataset,
) -> Result<Vec<f64>> {
    if y_current.len() != dataset.num_samples() {
        return Err(CoreError::ShapeMismatch {
            context: "residualize response length".into(),
            left: vec![y_current.len()],
            right: vec![dataset.num_samples()],
        });
    }
    let preds = predict_samples(dataset.x(), term)?;
    Ok(y_current.iter().zip(&preds).map(|(y, p)| y - p).collect())
}

/// Disjoint shuffled fold partition; deterministic in the seed.
pub fn fold_partition(m: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (k, &s) in order.iter().enumerate() {
        out[k % folds].push(s);
    }
    out
}

/// Per-fold squared errors for every candidate penalty of one solver run.
fn fold_candidate_sq_errors(
    train: &TensorDataset,
    val: &TensorDataset,
    candidates: &[f64],
    solver: &SolverSpec,
) -> Result<(Vec<f64>, usize)> {
    let entry_shape = train.entry_shape().to_vec();
    let mut flagged = 0usize;
    let solutions: Vec<UnitRankTerm> = match solver {
        SolverSpec::Surf(cfg) => {
            let path = trace_path(train, cfg)?;
            flagged += path.truncated as usize;
            candidates
                .iter()
                .map(|&l| path.solution_at(l, &entry_shape))
                .collect()
        }
        SolverSpec::Acs(cfg) => {
            let mut cfg = cfg.clone();
            cfg.lambda_grid = candidates.to_vec();
            let path = acs_path(train, &cfg)?;
            flagged += !path.converged as usize;
            candidates
                .iter()
                .map(|&l| path.solution_at(l, &entry_shape))
                .collect()
        }
    };
    let mut out = Vec::with_capacity(candidates.len());
    for term in &solutions {
        let preds = predict_samples(val.x(), term)?;
        let sq: f64 = val
            .y()
            .iter()
            .zip(&preds)
            .map(|(y, p)| (y - p) * (y - p))
            .sum();
        out.push(sq);
    }
    Ok((out, flagged))
}

struct CvOutcome {
    lambda: f64,
    cv_mse: f64,
    table: Vec<CvEntry>,
}

/// K-fold CV over the candidate penalties of one term's path. Fold work is
/// independent and runs on scoped threads when `threads > 1`.
fn cross_validate_term(
    dataset: &TensorDataset,
    candidates: &[f64],
    solver: &SolverSpec,
    cv: &CvConfig,
    threads: usize,
    flags: &mut FitFlags,
) -> Result<Option<CvOutcome>> {
    if candidates.is_empty() {
        return Ok(None);
    }
    let m = dataset.num_samples();
    let folds = fold_partition(m, cv.folds.min(m), cv.seed);
    let folds: Vec<Vec<usize>> = folds.into_iter().filter(|f| !f.is_empty()).collect();
    if folds.len() < 2 {
        return Ok(None);
    }

    let mut splits = Vec::with_capacity(folds.len());
    for k in 0..folds.len() {
        let val_idx = &folds[k];
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        splits.push((dataset.subset(&train_idx)?, dataset.subset(val_idx)?));
    }

    let fold_results: Vec<(Vec<f64>, usize)> = if threads > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = splits
                .iter()
                .map(|(train, val)| {
                    scope.spawn(move || fold_candidate_sq_errors(train, val, candidates, solver))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold thread"))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect::<Result<_>>()?
    } else {
        splits
            .iter()
            .map(|(train, val)| fold_candidate_sq_errors(train, val, candidates, solver))
            .collect::<Result<_>>()?
    };
    let mut per_fold = Vec::with_capacity(fold_results.len());
    for (errors, flagged) in fold_results {
        flags.flagged_runs += flagged;
        per_fold.push(errors);
    }

    let k = folds.len();
    let mut table = Vec::with_capacity(candidates.len());
    for (c, &lambda) in candidates.iter().enumerate() {
        let total_sq: f64 = per_fold.iter().map(|f| f[c]).sum();
        let cv_mse = total_sq / m as f64;
        // Standard error over per-fold MSEs.
        let fold_mses: Vec<f64> = per_fold
            .iter()
            .enumerate()
            .map(|(j, f)| f[c] / folds[j].len() as f64)
            .collect();
        let mean = fold_mses.iter().sum::<f64>() / k as f64;
        let var = fold_mses
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (k.saturating_sub(1).max(1)) as f64;
        let se = (var / k as f64).sqrt();
        table.push(CvEntry { lambda, cv_mse, se });
    }

    // Candidates are in decreasing lambda order, so strict improvement keeps
    // the largest lambda on ties.
    let mut best = 0usize;
    for (c, row) in table.iter().enumerate() {
        if row.cv_mse < table[best].cv_mse {
            best = c;
        }
    }
    if cv.one_se_rule {
        let limit = table[best].cv_mse + table[best].se;
        for (c, row) in table.iter().enumerate() {
            if row.cv_mse <= limit {
                best = c;
                break;
            }
        }
    }
    Ok(Some(CvOutcome {
        lambda: table[best].lambda,
        cv_mse: table[best].cv_mse,
        table,
    }))
}

/// Full-data solution of one term at a fixed penalty.
fn full_solution(
    dataset: &TensorDataset,
    lambda: f64,
    solver: &SolverSpec,
    flags: &mut FitFlags,
) -> Result<UnitRankTerm> {
    let entry_shape = dataset.entry_shape().to_vec();
    match solver {
        SolverSpec::Surf(cfg) => {
            let path = trace_path(dataset, cfg)?;
            flags.flagged_runs += path.truncated as usize;
            Ok(path.solution_at(lambda, &entry_shape))
        }
        SolverSpec::Acs(cfg) => {
            let mut cfg = cfg.clone();
            cfg.lambda_grid = vec![lambda];
            let path = acs_path(dataset, &cfg)?;
            flags.flagged_runs += !path.converged as usize;
            Ok(path.solution_at(lambda, &entry_shape))
        }
    }
}

/// Candidate penalties for one term on the full data.
fn term_candidates(
    dataset: &TensorDataset,
    solver: &SolverSpec,
    flags: &mut FitFlags,
) -> Result<Vec<f64>> {
    match solver {
        SolverSpec::Surf(cfg) => {
            let path = trace_path(dataset, cfg)?;
            flags.flagged_runs += path.truncated as usize;
            Ok(path.distinct_lambdas())
        }
        SolverSpec::Acs(cfg) => Ok(cfg.grid_for(dataset)),
    }
}

/// Fits unit-rank terms on successive residuals until the cross-validated
/// error stops improving, a term collapses to zero, or the rank cap fires.
pub fn sequential_fit(
    dataset: &TensorDataset,
    solver: &SolverSpec,
    cv: &CvConfig,
    threads: usize,
) -> Result<CPModel> {
    cv.validate()?;
    let m = dataset.num_samples();
    let null_rmse = rmse(dataset.y(), &vec![0.0; m]);
    let mut model = CPModel {
        terms: Vec::new(),
        standardization: dataset.std().clone(),
        selection: Vec::new(),
        null_rmse,
        flags: FitFlags::default(),
    };

    let mut y_r = dataset.y().to_vec();
    let mut best_rmse = null_rmse;
    for r in 0..cv.rank_cap {
        let attach = |e: CoreError| CoreError::TermFailure {
            term_index: r,
            source: Box::new(e),
        };
        let ds_r = dataset.with_response(y_r.clone()).map_err(attach)?;
        let mut flags = FitFlags::default();
        let candidates = term_candidates(&ds_r, solver, &mut flags).map_err(attach)?;
        let outcome = cross_validate_term(&ds_r, &candidates, solver, cv, threads, &mut flags)
            .map_err(attach)?;
        model.flags.flagged_runs += flags.flagged_runs;
        let Some(outcome) = outcome else {
            break;
        };
        let cv_rmse = outcome.cv_mse.sqrt();
        if cv_rmse >= best_rmse - CV_IMPROVEMENT_TOL {
            break;
        }
        let mut refit_flags = FitFlags::default();
        let term =
            full_solution(&ds_r, outcome.lambda, solver, &mut refit_flags).map_err(attach)?;
        model.flags.flagged_runs += refit_flags.flagged_runs;
        if term.sigma == 0.0 {
            break;
        }
        y_r = residualize(&y_r, &term, dataset).map_err(attach)?;
        model.terms.push(term);
        model.selection.push(TermSelection {
            term_index: r,
            lambda: outcome.lambda,
            cv_rmse,
            solver: solver.name().into(),
            cv_table: outcome.table,
        });
        best_rmse = cv_rmse;
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// surf-model-v1 persistence
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    format: String,
    shape: Vec<usize>,
    std_file: String,
    null_rmse: f64,
    #[serde(default)]
    flags: FitFlags,
    terms: Vec<UnitRankTerm>,
    selection: Vec<TermSelection>,
}

/// Writes `model.json` plus the standardization sidecar into `dir`.
pub fn save_model(model: &CPModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let std = &model.standardization;
    let entries = std.entry_means.len();
    let mut rec = Vec::with_capacity(1 + 3 * entries);
    rec.push(std.y_mean);
    rec.extend_from_slice(std.entry_means.values());
    rec.extend_from_slice(std.entry_scales.values());
    rec.extend(
        std.zero_variance_mask
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 }),
    );
    write_f64s(&dir.join("model_std.f64"), &rec)?;
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        shape: model.entry_shape().to_vec(),
        std_file: "model_std.f64".into(),
        null_rmse: model.null_rmse,
        flags: model.flags,
        terms: model.terms.clone(),
        selection: model.selection.clone(),
    };
    fs::write(
        dir.join("model.json"),
        serde_json::to_vec_pretty(&manifest).map_err(|e| CoreError::Manifest(e.to_string()))?,
    )?;
    Ok(())
}

/// Loads a `surf-model-v1` model from a directory or manifest path.
pub fn load_model(path: &Path) -> Result<CPModel> {
    let manifest_path: PathBuf = if path.is_dir() {
        path.join("model.json")
    } else {
        path.to_path_buf()
    };
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let text = fs::read_to_string(&manifest_path)?;
    let manifest: ModelManifest =
        serde_json::from_str(&text).map_err(|e| CoreError::Manifest(e.to_string()))?;
    if manifest.format != MODEL_FORMAT {
        return Err(CoreError::Manifest(format!(
            "unsupported format {:?}",
            manifest.format
        )));
    }
    let entries: usize = manifest.shape.iter().product();
    let rec = read_f64s_exact(&dir.join(&manifest.std_file), 1 + 3 * entries)?;
    let standardization = StandardizationRecord {
        y_mean: rec[0],
        entry_means: DenseTensor::new(manifest.shape.clone(), rec[1..1 + entries].to_vec())?,
        entry_scales: DenseTensor::new(
            manifest.shape.clone(),
            rec[1 + entries..1 + 2 * entries].to_vec(),
        )?,
        zero_variance_mask: rec[1 + 2 * entries..].iter().map(|&v| v != 0.0).collect(),
    };
    for term in &manifest.terms {
        if term.shape() != manifest.shape {
            return Err(CoreError::Manifest("term shape mismatch".into()));
        }
    }
    Ok(CPModel {
        terms: manifest.terms,
        standardization,
        selection: manifest.selection,
        null_rmse: manifest.null_rmse,
        flags: manifest.flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::standardize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted_dataset(
        shape: &[usize],
        m: usize,
        terms: &[UnitRankTerm],
        noise_sd: f64,
        seed: u64,
    ) -> TensorDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut full = shape.to_vec();
        full.push(m);
        let total: usize = full.iter().product();
        let xr =
            DenseTensor::new(full, (0..total).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap();
        let ds0 = standardize(&xr, &vec![0.0; m]).unwrap();
        let mut y = vec![0.0; m];
        for t in terms {
            let p = predict_samples(ds0.x(), t).unwrap();
            for (yv, pv) in y.iter_mut().zip(&p) {
                *yv += pv;
            }
        }
        for yv in y.iter_mut() {
            *yv += noise_sd * rng.gen_range(-1.0..1.0);
        }
        ds0.with_response(y).unwrap()
    }

    #[test]
    fn residualize_zero_term_is_identity() {
        let ds = planted_dataset(&[3, 3], 10, &[], 1.0, 1);
        let z = UnitRankTerm::zero(&[3, 3]);
        let out = residualize(ds.y(), &z, &ds).unwrap();
        assert_eq!(out, ds.y());
    }

    #[test]
    fn residualize_exact_term_cancels_noiseless_response() {
        let truth =
            UnitRankTerm::new(1.5, vec![vec![0.5, 0.5, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        let ds = planted_dataset(&[3, 3], 12, std::slice::from_ref(&truth), 0.0, 2);
        let out = residualize(ds.y(), &truth, &ds).unwrap();
        let norm: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1e-8, "residual norm {norm}");
    }

    #[test]
    fn residualize_shape_mismatch_errors() {
        let ds = planted_dataset(&[2, 2], 6, &[], 1.0, 3);
        let z = UnitRankTerm::zero(&[2, 2]);
        assert!(residualize(&[0.0; 3], &z, &ds).is_err());
    }

    #[test]
    fn deflation_idempotence_with_zero_term() {
        let ds = planted_dataset(&[2, 2], 8, &[], 1.0, 4);
        let t = UnitRankTerm::new(0.7, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let once = residualize(ds.y(), &t, &ds).unwrap();
        let z = UnitRankTerm::zero(&[2, 2]);
        let twice = residualize(&once, &z, &ds).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn fold_partition_is_disjoint_cover_and_deterministic() {
        let a = fold_partition(23, 5, 9);
        let b = fold_partition(23, 5, 9);
        assert_eq!(a, b);
        let mut seen = [false; 23];
        for f in &a {
            for &i in f {
                assert!(!seen[i], "sample {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        let c = fold_partition(23, 5, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn rmse_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        let v = rmse(&[1.0, 2.0], &[2.0, 2.0]);
        assert!((v - (0.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sparsity_of_zero_model_is_one() {
        let model = CPModel {
            terms: Vec::new(),
            standardization: StandardizationRecord::identity(&[3, 3]).unwrap(),
            selection: Vec::new(),
            null_rmse: 1.0,
            flags: FitFlags::default(),
        };
        assert_eq!(sparsity_of_coefficients(&model).unwrap(), 1.0);
    }

    #[test]
    fn empty_model_predicts_the_response_mean() {
        let mut std = StandardizationRecord::identity(&[2, 2]).unwrap();
        std.y_mean = 3.25;
        let model = CPModel {
            terms: Vec::new(),
            standardization: std,
            selection: Vec::new(),
            null_rmse: 1.0,
            flags: FitFlags::default(),
        };
        let raw = DenseTensor::new(vec![2, 2, 3], (0..12).map(|v| v as f64).collect()).unwrap();
        let preds = model.predict(&raw).unwrap();
        assert_eq!(preds, vec![3.25, 3.25, 3.25]);
    }

    #[test]
    fn prediction_invariant_to_term_order() {
        let t1 = UnitRankTerm::new(1.0, vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let t2 = UnitRankTerm::new(0.5, vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let std = StandardizationRecord::identity(&[2, 2]).unwrap();
        let a = CPModel {
            terms: vec![t1.clone(), t2.clone()],
            standardization: std.clone(),
            selection: Vec::new(),
            null_rmse: 1.0,
            flags: FitFlags::default(),
        };
        let b = CPModel {
            terms: vec![t2, t1],
            standardization: std,
            selection: Vec::new(),
            null_rmse: 1.0,
            flags: FitFlags::default(),
        };
        let raw =
            DenseTensor::new(vec![2, 2, 4], (0..16).map(|v| v as f64 * 0.3).collect()).unwrap();
        for (pa, pb) in a
            .predict(&raw)
            .unwrap()
            .iter()
            .zip(&b.predict(&raw).unwrap())
        {
            assert!((pa - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_cap_one_matches_single_run() {
        let truth =
            UnitRankTerm::new(2.0, vec![vec![0.5, -0.5, 0.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let ds = planted_dataset(&[3, 3], 40, &[truth], 0.05, 7);
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let cv = CvConfig {
            rank_cap: 1,
            ..CvConfig::default()
        };
        let model = sequential_fit(&ds, &solver, &cv, 1).unwrap();
        assert!(model.rank() <= 1);
        if model.rank() == 1 {
            let mut flags = FitFlags::default();
            let candidates = term_candidates(&ds, &solver, &mut flags).unwrap();
            let outcome = cross_validate_term(&ds, &candidates, &solver, &cv, 1, &mut flags)
                .unwrap()
                .unwrap();
            let single = full_solution(&ds, outcome.lambda, &solver, &mut flags).unwrap();
            assert_eq!(model.terms[0], single);
        }
    }

    #[test]
    fn accepted_term_beats_zero_solution_on_training_objective() {
        let truth =
            UnitRankTerm::new(2.0, vec![vec![0.5, -0.5, 0.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let ds = planted_dataset(&[3, 3], 50, &[truth], 0.1, 8);
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let model = sequential_fit(&ds, &solver, &CvConfig::default(), 1).unwrap();
        assert!(model.rank() >= 1, "expected at least one accepted term");
        let sel = &model.selection[0];
        let term = &model.terms[0];
        let (gamma, _) =
            crate::surf::penalized_loss(&ds, term.sigma, &term.factors, 1.0, sel.lambda).unwrap();
        let (gamma_zero, _) = crate::surf::penalized_loss(
            &ds,
            0.0,
            &UnitRankTerm::zero(&[3, 3]).factors,
            1.0,
            sel.lambda,
        )
        .unwrap();
        assert!(gamma <= gamma_zero + 1e-12);
        // And the deflated residual can only shrink the response norm.
        let resid = residualize(ds.y(), term, &ds).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&resid) <= norm(ds.y()));
    }

    #[test]
    fn noiseless_instance_is_fitted_to_interpolation() {
        // A representable rank-1 truth with no noise: with a negligible ridge
        // and a grid reaching far down the path, the fitted model predicts
        // the training responses almost exactly.
        let truth =
            UnitRankTerm::new(1.5, vec![vec![0.5, -0.5, 0.0], vec![0.0, 0.5, 0.5]]).unwrap();
        let ds = planted_dataset(&[3, 3], 30, &[truth], 0.0, 15);
        let acs = AcsConfig {
            alpha: 1e-12,
            lambda_grid: crate::acs::log_grid(crate::surf::lambda_max(&ds), 1e-10, 25),
            block_tol: 1e-14,
            cd_tol: 1e-13,
            cd_max_iter: 50_000,
            max_sweeps: 2_000,
            ..AcsConfig::default()
        };
        let cv = CvConfig {
            rank_cap: 2,
            ..CvConfig::default()
        };
        let model = sequential_fit(&ds, &SolverSpec::Acs(acs), &cv, 1).unwrap();
        assert!(model.rank() >= 1);
        let preds = model.predict_standardized(ds.x()).unwrap();
        let err = rmse(ds.y(), &preds);
        assert!(err <= 1e-6, "training rmse {err}");
    }

    #[test]
    fn pure_noise_response_keeps_few_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ds0 = planted_dataset(&[3, 3], 120, &[], 0.0, 9);
        let noise: Vec<f64> = (0..120).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = noise.iter().sum::<f64>() / 120.0;
        let centered: Vec<f64> = noise.iter().map(|v| v - mean).collect();
        let ds = ds0.with_response(centered.clone()).unwrap();
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let model = sequential_fit(&ds, &solver, &CvConfig::default(), 1).unwrap();
        assert!(model.rank() <= 2, "noise fit rank {}", model.rank());
        // CV error of the null model is just the response variance.
        let var = centered.iter().map(|v| v * v).sum::<f64>() / 120.0;
        assert!((model.null_rmse - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sequential_fit_is_seed_reproducible() {
        let truth = UnitRankTerm::new(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ds = planted_dataset(&[2, 2], 30, &[truth], 0.2, 10);
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let cv = CvConfig {
            seed: 42,
            ..CvConfig::default()
        };
        let a = sequential_fit(&ds, &solver, &cv, 1).unwrap();
        let b = sequential_fit(&ds, &solver, &cv, 2).unwrap();
        assert_eq!(a.terms, b.terms);
        assert_eq!(a.selection.len(), b.selection.len());
        for (sa, sb) in a.selection.iter().zip(&b.selection) {
            assert_eq!(sa.lambda.to_bits(), sb.lambda.to_bits());
            assert_eq!(sa.cv_rmse.to_bits(), sb.cv_rmse.to_bits());
        }
    }

    #[test]
    fn dominant_component_support_is_found_first() {
        // Well-separated planted rank-2 truth at high SNR: the first
        // extracted term's support must overlap the dominant component's.
        let t1 = UnitRankTerm::new(
            3.0,
            vec![
                vec![0.6, -0.4, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.5, 0.5, 0.0],
            ],
        )
        .unwrap();
        let t2 = UnitRankTerm::new(
            0.5,
            vec![
                vec![0.0, 0.0, 0.0, 0.0, -1.0],
                vec![1.0, 0.0, 0.0, 0.0, 0.0],
            ],
        )
        .unwrap();
        let ds = planted_dataset(&[5, 5], 80, &[t1.clone(), t2], 0.5, 12);
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let model = sequential_fit(&ds, &solver, &CvConfig::default(), 1).unwrap();
        assert!(model.rank() >= 1);
        let fitted = model.terms[0].materialize().unwrap();
        let dominant = t1.materialize().unwrap();
        let fitted_support: Vec<usize> = (0..fitted.len())
            .filter(|&i| fitted.values()[i] != 0.0)
            .collect();
        let dominant_support: Vec<usize> = (0..dominant.len())
            .filter(|&i| dominant.values()[i] != 0.0)
            .collect();
        let inter = fitted_support
            .iter()
            .filter(|i| dominant_support.contains(i))
            .count();
        let union = fitted_support.len() + dominant_support.len() - inter;
        let jaccard = inter as f64 / union as f64;
        assert!(
            jaccard >= 0.5,
            "jaccard {jaccard} (fitted {fitted_support:?} vs dominant {dominant_support:?})"
        );
    }

    #[test]
    fn solver_failure_carries_the_term_index() {
        let ds = planted_dataset(&[2, 2], 10, &[], 1.0, 13);
        let mut bad = SurfConfig::new(0.1);
        bad.epsilon = -1.0;
        let err = sequential_fit(&ds, &SolverSpec::Surf(bad), &CvConfig::default(), 1).unwrap_err();
        match err {
            CoreError::TermFailure { term_index, .. } => assert_eq!(term_index, 0),
            other => panic!("expected TermFailure, got {other}"),
        }
    }

    #[test]
    fn one_se_rule_never_picks_a_smaller_penalty() {
        let truth =
            UnitRankTerm::new(2.0, vec![vec![0.5, -0.5, 0.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let ds = planted_dataset(&[3, 3], 60, &[truth], 0.1, 14);
        let solver = SolverSpec::Surf(SurfConfig::new(0.05));
        let base = sequential_fit(&ds, &solver, &CvConfig::default(), 1).unwrap();
        let one_se = sequential_fit(
            &ds,
            &solver,
            &CvConfig {
                one_se_rule: true,
                ..CvConfig::default()
            },
            1,
        )
        .unwrap();
        if base.rank() >= 1 && one_se.rank() >= 1 {
            assert!(one_se.selection[0].lambda >= base.selection[0].lambda);
        }
    }

    #[test]
    fn model_round_trip() {
        let truth = UnitRankTerm::new(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ds = planted_dataset(&[2, 2], 30, &[truth], 0.2, 11);
        let solver = SolverSpec::Surf(SurfConfig::new(0.1));
        let model = sequential_fit(&ds, &solver, &CvConfig::default(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&model, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.terms, model.terms);
        assert_eq!(back.standardization, model.standardization);
        assert_eq!(back.null_rmse, model.null_rmse);
        assert_eq!(back.selection.len(), model.selection.len());
    }
}
