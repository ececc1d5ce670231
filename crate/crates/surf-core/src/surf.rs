//! Stagewise unit-rank factorization: traces the whole l1 regularization path
//! of the penalized unit-rank regression problem
//!
//! ```text
//! min (1/M) sum_m (y^m - <X^m, W>)^2 + lambda*||W||_1 + alpha*||W||_F^2,
//!     rank(W) <= 1,  W = sigma * w_1 o ... o w_N,  ||w_n||_1 = 1
//! ```
//!
//! in a single run of +/-epsilon coordinate moves. A backward step removes
//! epsilon of mass from an active coordinate whenever that lowers the
//! penalized objective by at least xi at the current lambda; otherwise the
//! forward step adds epsilon along the single best coordinate over all modes
//! and lambda relaxes just enough to keep the move admissible. The ridge term
//! is folded into the unpenalized loss J via the augmented-data form, so
//! candidate scores stay closed-form.
//!
//! State carries one `Z^(-n) = X x_1 w_1 ... (skip n) ... x_N w_N` cache per
//! mode, updated incrementally from a single slice contraction per step; the
//! residual is refreshed from the stepped mode's own (unchanged) cache, so
//! per-step work is `O(M * sum_n I_n)` plus the slice contraction.

use std::collections::BTreeSet;

use crate::dataset::TensorDataset;
use crate::error::{CoreError, Result};
use crate::path::{PathPoint, SparseFactor, StepType, TracedPath};
use crate::tensor::{
    contract_samples_except, contract_samples_except_pair, multi_index, predict_samples,
    UnitRankTerm,
};

/// Step-size / tolerance / ridge configuration.
#[derive(Debug, Clone)]
pub struct SurfConfig {
    /// Step size epsilon > 0.
    pub epsilon: f64,
    /// Descent tolerance xi >= 0; defaults to epsilon^2 / 2.
    pub xi: f64,
    /// Ridge weight alpha > 0.
    pub alpha: f64,
    /// Safety cap on steps; `None` derives `ceil(10 * sum_n I_n / epsilon)`.
    pub max_steps: Option<usize>,
}

impl SurfConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            xi: epsilon * epsilon / 2.0,
            alpha: 1.0,
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "xi must be >= 0, got {}",
                self.xi
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.max_steps == Some(0) {
            return Err(CoreError::InvalidArgument("max_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn resolve_max_steps(&self, entry_shape: &[usize]) -> usize {
        self.max_steps.unwrap_or_else(|| {
            let dims: usize = entry_shape.iter().sum();
            (10.0 * dims as f64 / self.epsilon).ceil() as usize
        })
    }
}

impl Default for SurfConfig {
    fn default() -> Self {
        Self::new(0.1)
    }
}

/// Smallest penalty at which the all-zero coefficient is optimal:
/// `(2/M) max_i |x_i' y|` over the entry columns of the last-mode
/// matricization.
pub fn lambda_max(dataset: &TensorDataset) -> f64 {
    let m = dataset.num_samples();
    let y = dataset.y();
    let mut best = 0.0f64;
    for i in 0..dataset.num_entries() {
        let row = &dataset.x().values()[i * m..(i + 1) * m];
        let d = dot(row, y).abs();
        if d > best {
            best = d;
        }
    }
    2.0 * best / m as f64
}

/// Penalized objective evaluated from scratch:
/// `J = (1/M) sum (y - <X,W>)^2 + alpha * sigma^2 * prod ||w_n||_2^2`,
/// `Gamma = J + lambda * sigma`. Returns `(gamma, j)`.
pub fn penalized_loss(
    dataset: &TensorDataset,
    sigma: f64,
    factors: &[Vec<f64>],
    alpha: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    let term = UnitRankTerm {
        sigma,
        factors: factors.to_vec(),
    };
    let preds = predict_samples(dataset.x(), &term)?;
    let m = dataset.num_samples() as f64;
    let fit: f64 = dataset
        .y()
        .iter()
        .zip(&preds)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        / m;
    let norm_prod: f64 = factors.iter().map(|f| sq_norm(f)).product();
    let j = fit + alpha * sigma * sigma * norm_prod;
    Ok((j + lambda * sigma, j))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Forward proposal: the (mode, index, signed step) minimizing the
/// unpenalized loss over all coordinates of all modes.
#[derive(Debug, Clone, Copy)]
pub struct ForwardCandidate {
    pub mode: usize,
    pub index: usize,
    /// Signed step, always +/- epsilon.
    pub step: f64,
    /// Exact change in J for this move.
    pub j_delta: f64,
    /// Selection score `2|g| - eps*d` (larger is better).
    pub score: f64,
}

/// Backward proposal: the active (mode, index) minimizing J for a step of
/// epsilon toward zero, with the applied step clamped so the coordinate
/// lands exactly at zero instead of crossing it.
#[derive(Debug, Clone, Copy)]
pub struct BackwardCandidate {
    pub mode: usize,
    pub index: usize,
    /// Signed applied step (clamped when the coordinate is within epsilon of 0).
    pub step: f64,
    /// Exact change in Gamma(.; lambda_t) for the applied step.
    pub gamma_delta: f64,
}

/// Outcome of one solver step.
#[derive(Debug, Clone)]
pub enum StepOutcome {
    Applied(PathPoint),
    /// The path ended: either the lambda update would go nonpositive (state
    /// unchanged) or sigma collapsed to zero (factors unidentifiable).
    Terminal(PathPoint),
}

/// Result of initialization.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SurfInit {
    Started(SurfState, PathPoint),
    /// `lambda_max == 0`: the zero model is the whole path.
    ZeroModel,
}

/// Full solver state: scaled factors, active sets, per-mode caches and the
/// current penalty.
#[derive(Debug, Clone)]
pub struct SurfState {
    sigma: f64,
    factors: Vec<Vec<f64>>,
    active: Vec<BTreeSet<usize>>,
    lambda: f64,
    t: usize,
    /// Z^(-n), row-major I_n x M, one per mode.
    z: Vec<Vec<f64>>,
    /// Residual y - prediction, length M.
    e: Vec<f64>,
    /// Squared l2 norms of the factors.
    norms_sq: Vec<f64>,
    /// Current unpenalized loss J.
    j: f64,
    epsilon: f64,
    xi: f64,
    alpha: f64,
}

impl SurfState {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn active_sets(&self) -> &[BTreeSet<usize>] {
        &self.active
    }

    pub fn loss(&self) -> f64 {
        self.j
    }

    pub fn residual(&self) -> &[f64] {
        &self.e
    }

    /// Cached `Z^(-n)` as a row-major `I_n x M` buffer.
    pub fn z_cache(&self, mode: usize) -> &[f64] {
        &self.z[mode]
    }

    pub fn as_term(&self) -> UnitRankTerm {
        UnitRankTerm {
            sigma: self.sigma,
            factors: self.factors.clone(),
        }
    }

    pub fn snapshot(&self, step_type: StepType) -> PathPoint {
        PathPoint {
            t: self.t,
            lambda: self.lambda,
            step_type,
            sigma: self.sigma,
            factors: self
                .factors
                .iter()
                .map(|f| SparseFactor::from_dense(f))
                .collect(),
            gamma: self.j + self.lambda * self.sigma,
            j: self.j,
        }
    }

    fn beta_except(&self, mode: usize) -> f64 {
        self.norms_sq
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != mode)
            .map(|(_, &v)| v)
            .product()
    }

    fn recompute_loss(&mut self) {
        let m = self.e.len() as f64;
        let norm_prod: f64 = self.norms_sq.iter().product();
        self.j = sq_norm(&self.e) / m + self.alpha * self.sigma * self.sigma * norm_prod;
    }

    fn refresh_residual(&mut self, dataset: &TensorDataset, mode: usize) {
        let m = dataset.num_samples();
        let z = &self.z[mode];
        self.e.copy_from_slice(dataset.y());
        for &i in &self.active[mode] {
            let c = self.sigma * self.factors[mode][i];
            if c == 0.0 {
                continue;
            }
            let row = &z[i * m..(i + 1) * m];
            for (ev, rv) in self.e.iter_mut().zip(row) {
                *ev -= c * rv;
            }
        }
    }

    /// Best forward move over all modes and coordinates. Ties resolve to the
    /// lowest (mode, index) with the positive sign preferred.
    pub fn forward_candidate(&self, dataset: &TensorDataset) -> ForwardCandidate {
        let m = dataset.num_samples();
        let mf = m as f64;
        let eps = self.epsilon;
        let mut best: Option<ForwardCandidate> = None;
        for (n, z) in self.z.iter().enumerate() {
            let abm = self.alpha * self.beta_except(n) * mf;
            for i in 0..dataset.entry_shape()[n] {
                let row = &z[i * m..(i + 1) * m];
                let g = dot(row, &self.e) - abm * self.sigma * self.factors[n][i];
                let d = sq_norm(row) + abm;
                let score = 2.0 * g.abs() - eps * d;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let step = if g >= 0.0 { eps } else { -eps };
                    best = Some(ForwardCandidate {
                        mode: n,
                        index: i,
                        step,
                        j_delta: (-2.0 * step * g + eps * eps * d) / mf,
                        score,
                    });
                }
            }
        }
        best.expect("at least one candidate coordinate")
    }

    /// Best backward move over the active sets, or `None` when every active
    /// set is empty. Selection uses the epsilon closed form; the returned
    /// step and gamma delta reflect the clamped move actually applied.
    pub fn backward_candidate(&self, dataset: &TensorDataset) -> Option<BackwardCandidate> {
        let m = dataset.num_samples();
        let mf = m as f64;
        let eps = self.epsilon;
        let mut best: Option<(f64, usize, usize, f64, f64)> = None; // score, n, i, g, d
        for (n, z) in self.z.iter().enumerate() {
            if self.active[n].is_empty() {
                continue;
            }
            let abm = self.alpha * self.beta_except(n) * mf;
            for &i in &self.active[n] {
                let w_hat = self.sigma * self.factors[n][i];
                let row = &z[i * m..(i + 1) * m];
                let g = dot(row, &self.e) - abm * w_hat;
                let d = sq_norm(row) + abm;
                let score = 2.0 * w_hat.signum() * g + eps * d;
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, n, i, g, d));
                }
            }
        }
        let (_, n, i, g, d) = best?;
        let w_hat = self.sigma * self.factors[n][i];
        // Land exactly at zero instead of crossing it.
        let step = if w_hat.abs() <= eps {
            -w_hat
        } else {
            -w_hat.signum() * eps
        };
        let j_delta = (-2.0 * step * g + step * step * d) / mf;
        let gamma_delta = j_delta - self.lambda * step.abs();
        Some(BackwardCandidate {
            mode: n,
            index: i,
            step,
            gamma_delta,
        })
    }

    fn l1_after_step(&self, mode: usize, index: usize, step: f64) -> f64 {
        let mut total = (self.sigma * self.factors[mode][index] + step).abs();
        for &i in &self.active[mode] {
            if i != index {
                total += (self.sigma * self.factors[mode][i]).abs();
            }
        }
        total
    }

    /// Applies a signed step to one coordinate: rescale sigma, renormalize the
    /// stepped factor, refresh the residual from the stepped mode's cache and
    /// update every other mode's cache from one slice contraction.
    fn apply_step(
        &mut self,
        dataset: &TensorDataset,
        mode: usize,
        index: usize,
        step: f64,
        new_lambda: f64,
        step_type: StepType,
    ) -> PathPoint {
        let sigma_old = self.sigma;
        let new_coord = sigma_old * self.factors[mode][index] + step;
        let sigma_new = self.l1_after_step(mode, index, step);
        self.t += 1;
        self.lambda = new_lambda;

        if sigma_new == 0.0 {
            // The stepped factor vanished; the term is the zero tensor.
            self.sigma = 0.0;
            for (f, a) in self.factors.iter_mut().zip(self.active.iter_mut()) {
                f.iter_mut().for_each(|v| *v = 0.0);
                a.clear();
            }
            self.e.copy_from_slice(dataset.y());
            self.norms_sq.iter_mut().for_each(|v| *v = 0.0);
            self.recompute_loss();
            return self.snapshot(StepType::Terminal);
        }

        let ratio = sigma_old / sigma_new;
        let indices: Vec<usize> = self.active[mode].iter().copied().collect();
        for i in indices {
            if i != index {
                self.factors[mode][i] *= ratio;
            }
        }
        self.factors[mode][index] = new_coord / sigma_new;
        if new_coord == 0.0 {
            self.factors[mode][index] = 0.0;
            self.active[mode].remove(&index);
        } else {
            self.active[mode].insert(index);
        }
        self.sigma = sigma_new;
        self.norms_sq[mode] = self.active[mode]
            .iter()
            .map(|&i| self.factors[mode][i] * self.factors[mode][i])
            .sum();

        // Residual from the stepped mode's own cache, which this step leaves
        // untouched; then the incremental rank-1 cache update for the rest.
        self.refresh_residual(dataset, mode);
        let n_modes = self.factors.len();
        for n in 0..n_modes {
            if n == mode {
                continue;
            }
            let slice = contract_samples_except_pair(dataset.x(), &self.factors, n, mode, index)
                .expect("shapes fixed at initialization");
            for (zv, sv) in self.z[n].iter_mut().zip(&slice) {
                *zv = (sigma_old * *zv + step * sv) / sigma_new;
            }
        }
        self.recompute_loss();
        self.snapshot(step_type)
    }

    /// One iteration: a backward step when it lowers Gamma(.; lambda) by at
    /// least xi, otherwise the forward step with its lambda relaxation.
    pub fn step(&mut self, dataset: &TensorDataset) -> StepOutcome {
        if let Some(b) = self.backward_candidate(dataset) {
            if b.gamma_delta <= -self.xi {
                let lambda = self.lambda;
                let point =
                    self.apply_step(dataset, b.mode, b.index, b.step, lambda, StepType::Backward);
                return if self.sigma == 0.0 {
                    StepOutcome::Terminal(point)
                } else {
                    StepOutcome::Applied(point)
                };
            }
        }
        let f = self.forward_candidate(dataset);
        let sigma_new = self.l1_after_step(f.mode, f.index, f.step);
        let omega_delta = sigma_new - self.sigma;
        let new_lambda = if omega_delta > 0.0 {
            let ratio = (-f.j_delta - self.xi) / omega_delta;
            ratio.min(self.lambda)
        } else {
            // No growth in the penalty term, so lambda stays. Such a move is
            // only admissible as a fixed-lambda descent step; otherwise the
            // path has converged at this lambda and relaxing it further is
            // impossible too.
            let gamma_delta = f.j_delta + self.lambda * omega_delta;
            if gamma_delta > -self.xi {
                return StepOutcome::Terminal(self.snapshot(StepType::Terminal));
            }
            self.lambda
        };
        if new_lambda <= 0.0 {
            return StepOutcome::Terminal(self.snapshot(StepType::Terminal));
        }
        let point = self.apply_step(
            dataset,
            f.mode,
            f.index,
            f.step,
            new_lambda,
            StepType::Forward,
        );
        if self.sigma == 0.0 {
            StepOutcome::Terminal(point)
        } else {
            StepOutcome::Applied(point)
        }
    }
}

/// Explicit initialization: the single best (entry, +/-epsilon) one-hot
/// candidate, with `lambda_0 = (J(0) - J(init)) / epsilon`. Returns
/// [`SurfInit::ZeroModel`] when `lambda_max == 0`.
pub fn initialize(dataset: &TensorDataset, config: &SurfConfig) -> Result<SurfInit> {
    config.validate()?;
    let m = dataset.num_samples();
    let mf = m as f64;
    let eps = config.epsilon;
    let entry_shape = dataset.entry_shape().to_vec();
    let y = dataset.y();

    let mut best: Option<(f64, usize, f64)> = None; // score, flat entry, signed dot
    let mut max_abs_dot = 0.0f64;
    for i in 0..dataset.num_entries() {
        let row = &dataset.x().values()[i * m..(i + 1) * m];
        let d = dot(row, y);
        max_abs_dot = max_abs_dot.max(d.abs());
        // J(0) - J(candidate) = (2*s*d - eps^2*(||x_i||^2 + alpha*M)) / M
        let score = 2.0 * eps * d.abs() - eps * eps * (sq_norm(row) + config.alpha * mf);
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, i, d));
        }
    }
    if max_abs_dot == 0.0 {
        return Ok(SurfInit::ZeroModel);
    }
    let (_, flat, d) = best.expect("nonempty entry set");
    let idx = multi_index(&entry_shape, flat);
    let sign = if d >= 0.0 { 1.0 } else { -1.0 };

    let n_modes = entry_shape.len();
    let mut factors: Vec<Vec<f64>> = entry_shape.iter().map(|&e| vec![0.0; e]).collect();
    let mut active: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_modes];
    for (n, f) in factors.iter_mut().enumerate() {
        f[idx[n]] = if n == 0 { sign } else { 1.0 };
        active[n].insert(idx[n]);
    }

    let z: Vec<Vec<f64>> = (0..n_modes)
        .map(|n| contract_samples_except(dataset.x(), &factors, n))
        .collect::<Result<_>>()?;
    let mut state = SurfState {
        sigma: eps,
        factors,
        active,
        lambda: 0.0,
        t: 0,
        z,
        e: vec![0.0; m],
        norms_sq: vec![1.0; n_modes],
        j: 0.0,
        epsilon: eps,
        xi: config.xi,
        alpha: config.alpha,
    };
    state.refresh_residual(dataset, 0);
    state.recompute_loss();

    let j_zero = sq_norm(y) / mf;
    state.lambda = (j_zero - state.j) / eps;
    let point = state.snapshot(StepType::Init);
    Ok(SurfInit::Started(state, point))
}

/// Runs initialize-then-step until the penalty would hit zero, sigma
/// collapses, or the step cap fires.
pub fn trace_path(dataset: &TensorDataset, config: &SurfConfig) -> Result<TracedPath> {
    config.validate()?;
    match initialize(dataset, config)? {
        SurfInit::ZeroModel => {
            let m = dataset.num_samples() as f64;
            let j = sq_norm(dataset.y()) / m;
            let point = PathPoint {
                t: 0,
                lambda: 0.0,
                step_type: StepType::Terminal,
                sigma: 0.0,
                factors: dataset
                    .entry_shape()
                    .iter()
                    .map(|&e| SparseFactor::from_dense(&vec![0.0; e]))
                    .collect(),
                gamma: j,
                j,
            };
            Ok(TracedPath {
                points: vec![point],
                truncated: false,
                forward_steps: 0,
                backward_steps: 0,
            })
        }
        SurfInit::Started(mut state, first) => {
            let max_steps = config.resolve_max_steps(dataset.entry_shape());
            let mut points = vec![first];
            let mut forward_steps = 0;
            let mut backward_steps = 0;
            let mut truncated = false;
            if state.lambda() <= 0.0 {
                points.push(state.snapshot(StepType::Terminal));
            } else {
                loop {
                    if state.t() >= max_steps {
                        truncated = true;
                        points.push(state.snapshot(StepType::Terminal));
                        break;
                    }
                    match state.step(dataset) {
                        StepOutcome::Applied(p) => {
                            match p.step_type {
                                StepType::Forward => forward_steps += 1,
                                StepType::Backward => backward_steps += 1,
                                _ => {}
                            }
                            points.push(p);
                        }
                        StepOutcome::Terminal(p) => {
                            points.push(p);
                            break;
                        }
                    }
                }
            }
            Ok(TracedPath {
                points,
                truncated,
                forward_steps,
                backward_steps,
            })
        }
    }
}
