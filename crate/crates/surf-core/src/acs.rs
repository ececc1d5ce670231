//! Alternating convex search baseline for the penalized unit-rank problem.
//!
//! For a fixed penalty the solver cycles over blocks `(sigma, w_n)`. With the
//! other factors frozen each block is an elastic-net problem in the scaled
//! factor `w_hat = sigma * w_n`, which the ridge rows turn into a standard
//! LASSO on augmented data:
//!
//! ```text
//! y_hat = (y, 0)',   Z_hat = (Z^(-n), sqrt(alpha * beta^(-n) * M) * I)'
//! min (1/M) ||y_hat - Z_hat w_hat||^2 + lambda ||w_hat||_1
//! ```
//!
//! solved by cyclic coordinate descent with exact soft-threshold updates.
//! Paths over a decreasing lambda grid reuse the previous solution as a warm
//! start; these are the reference paths the stagewise solver converges to as
//! its step size shrinks.

use crate::dataset::TensorDataset;
use crate::error::{CoreError, Result};
use crate::path::{PathPoint, SparseFactor, StepType};
use crate::surf::{initialize, lambda_max, penalized_loss, SurfConfig, SurfInit};
use crate::tensor::{contract_samples_except, UnitRankTerm};

/// Grid, ridge weight and convergence controls.
#[derive(Debug, Clone)]
pub struct AcsConfig {
    /// Ridge weight alpha > 0.
    pub alpha: f64,
    /// Strictly decreasing positive penalty grid.
    pub lambda_grid: Vec<f64>,
    /// Sweep-to-sweep objective-change threshold.
    pub block_tol: f64,
    /// Cap on full block cycles per lambda.
    pub max_sweeps: usize,
    /// KKT residual tolerance for the inner coordinate descent.
    pub cd_tol: f64,
    /// Cap on coordinate-descent sweeps per block.
    pub cd_max_iter: usize,
    /// Scale given to the one-hot initialization point.
    pub init_scale: f64,
}

impl Default for AcsConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda_grid: Vec::new(),
            block_tol: 1e-8,
            max_sweeps: 500,
            cd_tol: 1e-8,
            cd_max_iter: 10_000,
            init_scale: 0.1,
        }
    }
}

impl AcsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        for w in self.lambda_grid.windows(2) {
            if w[1] >= w[0] || w[1].is_nan() || w[0].is_nan() {
                return Err(CoreError::InvalidArgument(
                    "lambda grid must be strictly decreasing".into(),
                ));
            }
        }
        if self
            .lambda_grid
            .iter()
            .any(|&l| !(l.is_finite() && l > 0.0))
        {
            return Err(CoreError::InvalidArgument(
                "lambda grid values must be positive".into(),
            ));
        }
        if self.block_tol.is_nan()
            || self.block_tol <= 0.0
            || self.cd_tol.is_nan()
            || self.cd_tol <= 0.0
        {
            return Err(CoreError::InvalidArgument("tolerances must be > 0".into()));
        }
        if self.max_sweeps == 0
            || self.cd_max_iter == 0
            || self.init_scale.is_nan()
            || self.init_scale <= 0.0
        {
            return Err(CoreError::InvalidArgument(
                "iteration caps and init_scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// 100 log-spaced values from `lambda_max` down to `lambda_max * 1e-3`.
    pub fn default_grid(lmax: f64) -> Vec<f64> {
        log_grid(lmax, 1e-3, 100)
    }

    /// Grid for `dataset` — the configured one, or the default built from
    /// `lambda_max(dataset)`.
    pub fn grid_for(&self, dataset: &TensorDataset) -> Vec<f64> {
        if self.lambda_grid.is_empty() {
            Self::default_grid(lambda_max(dataset))
        } else {
            self.lambda_grid.clone()
        }
    }
}

/// `count` log-spaced values from `top` down to `top * min_ratio`.
pub fn log_grid(top: f64, min_ratio: f64, count: usize) -> Vec<f64> {
    if top.is_nan() || top <= 0.0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![top];
    }
    let lo = (top * min_ratio).ln();
    let hi = top.ln();
    (0..count)
        .map(|k| (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Augmented block data: `y` has length `M + I_n`, columns of `z` each hold
/// the `M` sample values of one coordinate followed by its single ridge row
/// entry `sqrt(alpha * beta^(-n) * M)`.
#[derive(Debug, Clone)]
pub struct AugmentedBlock {
    pub y: Vec<f64>,
    /// Column-major: `z_cols[j]` is the augmented column of coordinate `j`.
    pub z_cols: Vec<Vec<f64>>,
    /// The `M` used in the `1/M` loss scaling (the original sample count).
    pub m_scale: usize,
}

/// Builds the augmented LASSO data for block `mode` given the other factors.
pub fn build_augmented(
    dataset: &TensorDataset,
    factors: &[Vec<f64>],
    mode: usize,
    alpha: f64,
) -> Result<AugmentedBlock> {
    let m = dataset.num_samples();
    let extent = dataset.entry_shape()[mode];
    let z = contract_samples_except(dataset.x(), factors, mode)?;
    let beta: f64 = factors
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != mode)
        .map(|(_, f)| f.iter().map(|v| v * v).sum::<f64>())
        .product();
    let ridge = (alpha * beta * m as f64).sqrt();
    let mut y = dataset.y().to_vec();
    y.extend(std::iter::repeat_n(0.0, extent));
    let mut z_cols = Vec::with_capacity(extent);
    for j in 0..extent {
        let mut col = Vec::with_capacity(m + extent);
        col.extend_from_slice(&z[j * m..(j + 1) * m]);
        col.extend(std::iter::repeat_n(0.0, extent));
        col[m + j] = ridge;
        z_cols.push(col);
    }
    Ok(AugmentedBlock {
        y,
        z_cols,
        m_scale: m,
    })
}

/// Coordinate-descent LASSO solution with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct BlockLassoResult {
    pub w: Vec<f64>,
    pub converged: bool,
    /// Final max KKT residual over coordinates.
    pub kkt_residual: f64,
    pub sweeps: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes `(1/M) ||y - Z w||^2 + lambda ||w||_1` by cyclic coordinate
/// descent with exact soft-threshold updates; stops once every coordinate
/// satisfies the subgradient conditions within `cd_tol`.
pub fn solve_block_lasso(
    block: &AugmentedBlock,
    lambda: f64,
    warm_start: &[f64],
    cd_tol: f64,
    cd_max_iter: usize,
) -> BlockLassoResult {
    let p = block.z_cols.len();
    let mf = block.m_scale as f64;
    let mut w = warm_start.to_vec();
    debug_assert_eq!(w.len(), p);
    let col_sq: Vec<f64> = block
        .z_cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();

    // residual r = y - Z w
    let mut r = block.y.clone();
    for (j, col) in block.z_cols.iter().enumerate() {
        if w[j] != 0.0 {
            for (rv, cv) in r.iter_mut().zip(col) {
                *rv -= w[j] * cv;
            }
        }
    }

    let kkt = |w: &[f64], r: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for (j, col) in block.z_cols.iter().enumerate() {
            let g = 2.0 * dot(col, r) / mf;
            let res = if w[j] > 0.0 {
                (g - lambda).abs()
            } else if w[j] < 0.0 {
                (g + lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(res);
        }
        worst
    };

    let mut sweeps = 0;
    let mut residual = kkt(&w, &r);
    while residual > cd_tol && sweeps < cd_max_iter {
        for (j, col) in block.z_cols.iter().enumerate() {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho = dot(col, &r) + col_sq[j] * w[j];
            let new = soft_threshold(rho, lambda * mf / 2.0) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (rv, cv) in r.iter_mut().zip(col) {
                    *rv -= delta * cv;
                }
                w[j] = new;
            }
        }
        sweeps += 1;
        residual = kkt(&w, &r);
    }
    BlockLassoResult {
        w,
        converged: residual <= cd_tol,
        kkt_residual: residual,
        sweeps,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fit at one penalty plus diagnostics.
#[derive(Debug, Clone)]
pub struct AcsFit {
    pub term: UnitRankTerm,
    /// Final penalized objective.
    pub objective: f64,
    /// Objective after every accepted block update, nonincreasing.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Worst final KKT residual over blocks of the last sweep.
    pub kkt_residual: f64,
    /// Total block solves performed.
    pub block_solves: usize,
}

/// One-hot starting point: the best single entry, scaled to `init_scale`.
pub fn lemma_init(dataset: &TensorDataset, alpha: f64, scale: f64) -> Result<Option<UnitRankTerm>> {
    let cfg = SurfConfig {
        epsilon: scale,
        xi: 0.0,
        alpha,
        max_steps: None,
    };
    match initialize(dataset, &cfg)? {
        SurfInit::ZeroModel => Ok(None),
        SurfInit::Started(state, _) => Ok(Some(state.as_term())),
    }
}

/// Alternating convex search at a fixed penalty, from an explicit nonzero
/// starting term. Cycles blocks until the objective stalls; if any block
/// collapses to zero the whole term is set to zero and the cycle stops.
pub fn acs_fit(
    dataset: &TensorDataset,
    lambda: f64,
    config: &AcsConfig,
    init: &UnitRankTerm,
) -> Result<AcsFit> {
    config.validate()?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    if init.sigma <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "acs_fit needs an initialization with sigma > 0".into(),
        ));
    }
    if init.shape() != dataset.entry_shape() {
        return Err(CoreError::ShapeMismatch {
            context: "acs_fit initialization".into(),
            left: init.shape(),
            right: dataset.entry_shape().to_vec(),
        });
    }

    let n_modes = dataset.entry_shape().len();
    let mut sigma = init.sigma;
    let mut factors = init.factors.clone();
    let mut objective = penalized_loss(dataset, sigma, &factors, config.alpha, lambda)?.0;
    let mut trace = vec![objective];
    let mut block_solves = 0;
    let mut worst_kkt = 0.0f64;
    let mut converged = false;
    let mut sweeps = 0;

    'outer: while sweeps < config.max_sweeps {
        let sweep_start = objective;
        for mode in 0..n_modes {
            let block = build_augmented(dataset, &factors, mode, config.alpha)?;
            let warm: Vec<f64> = factors[mode].iter().map(|v| sigma * v).collect();
            let sol = solve_block_lasso(&block, lambda, &warm, config.cd_tol, config.cd_max_iter);
            block_solves += 1;
            worst_kkt = worst_kkt.max(sol.kkt_residual);
            let l1: f64 = sol.w.iter().map(|v| v.abs()).sum();
            if l1 == 0.0 {
                // Factor no longer identifiable: zero term, stop.
                sigma = 0.0;
                for f in factors.iter_mut() {
                    f.iter_mut().for_each(|v| *v = 0.0);
                }
                objective = penalized_loss(dataset, 0.0, &factors, config.alpha, lambda)?.0;
                trace.push(objective);
                converged = true;
                break 'outer;
            }
            let cand_factor: Vec<f64> = sol.w.iter().map(|v| v / l1).collect();
            let mut cand_factors = factors.clone();
            cand_factors[mode] = cand_factor;
            let cand_obj = penalized_loss(dataset, l1, &cand_factors, config.alpha, lambda)?.0;
            // Block solves are exact descent; reject only float-noise regressions
            // so the recorded trace is monotone by construction.
            if cand_obj <= objective {
                sigma = l1;
                factors = cand_factors;
                objective = cand_obj;
            }
            trace.push(objective);
        }
        sweeps += 1;
        if sweep_start - objective < config.block_tol {
            converged = true;
            break;
        }
    }

    let term = if sigma == 0.0 {
        UnitRankTerm::zero(dataset.entry_shape())
    } else {
        UnitRankTerm::new(sigma, factors)?
    };
    Ok(AcsFit {
        term,
        objective,
        objective_trace: trace,
        sweeps,
        converged,
        kkt_residual: worst_kkt,
        block_solves,
    })
}

/// One grid point of an ACS path.
#[derive(Debug, Clone)]
pub struct AcsPathPoint {
    pub lambda: f64,
    pub term: UnitRankTerm,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct AcsPath {
    pub points: Vec<AcsPathPoint>,
    pub total_block_solves: usize,
    /// True iff every grid fit converged.
    pub converged: bool,
}

impl AcsPath {
    /// Solution at `lambda`: the grid point with the smallest grid value
    /// `>= lambda`, or the zero term when `lambda` exceeds the whole grid.
    pub fn solution_at(&self, lambda: f64, entry_shape: &[usize]) -> UnitRankTerm {
        let mut out = UnitRankTerm::zero(entry_shape);
        for p in &self.points {
            if p.lambda >= lambda {
                out = p.term.clone();
            } else {
                break;
            }
        }
        out
    }

    /// Rows in the shared path export schema, `step_type` fixed to `acs`.
    pub fn to_path_points(&self, dataset: &TensorDataset, alpha: f64) -> Result<Vec<PathPoint>> {
        let mut out = Vec::with_capacity(self.points.len());
        for (t, p) in self.points.iter().enumerate() {
            let (gamma, j) =
                penalized_loss(dataset, p.term.sigma, &p.term.factors, alpha, p.lambda)?;
            out.push(PathPoint {
                t,
                lambda: p.lambda,
                step_type: StepType::Acs,
                sigma: p.term.sigma,
                factors: p
                    .term
                    .factors
                    .iter()
                    .map(|f| SparseFactor::from_dense(f))
                    .collect(),
                gamma,
                j,
            });
        }
        Ok(out)
    }
}

/// Solves the decreasing penalty grid with warm starts. Grid points in the
/// zero region fall back to the one-hot initialization for the next value.
pub fn acs_path(dataset: &TensorDataset, config: &AcsConfig) -> Result<AcsPath> {
    config.validate()?;
    let grid = config.grid_for(dataset);
    let mut points = Vec::with_capacity(grid.len());
    let mut total = 0;
    let mut all_converged = true;
    let init = lemma_init(dataset, config.alpha, config.init_scale)?;
    let Some(base_init) = init else {
        // lambda_max == 0: zero model everywhere.
        for lambda in grid {
            points.push(AcsPathPoint {
                lambda,
                term: UnitRankTerm::zero(dataset.entry_shape()),
                objective: penalized_loss(
                    dataset,
                    0.0,
                    &UnitRankTerm::zero(dataset.entry_shape()).factors,
                    config.alpha,
                    lambda,
                )?
                .0,
                converged: true,
            });
        }
        return Ok(AcsPath {
            points,
            total_block_solves: 0,
            converged: true,
        });
    };

    let mut warm = base_init.clone();
    for lambda in grid {
        let fit = acs_fit(dataset, lambda, config, &warm)?;
        total += fit.block_solves;
        all_converged &= fit.converged;
        if fit.term.sigma > 0.0 {
            warm = fit.term.clone();
        } else {
            warm = base_init.clone();
        }
        points.push(AcsPathPoint {
            lambda,
            term: fit.term,
            objective: fit.objective,
            converged: fit.converged,
        });
    }
    Ok(AcsPath {
        points,
        total_block_solves: total,
        converged: all_converged,
    })
}
