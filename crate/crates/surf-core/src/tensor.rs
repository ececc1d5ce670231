//! Dense order-N tensors and the contraction kernels the solvers are built on.
//!
//! A single canonical layout is used everywhere: a flat `f64` buffer in
//! row-major order with the **last index fastest**. The last-mode
//! matricization below is the documented bijection between multi-indices and
//! flat offsets, so a stacked predictor tensor of shape `(I_1, ..., I_N, M)`
//! can be read directly as a `(prod I_n) x M` matrix whose row `i` is the
//! length-`M` vector of entry `i` across samples.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Tolerance used to validate that unit-rank factors carry unit l1 norm.
pub const UNIT_L1_TOL: f64 = 1e-8;

/// Dense real tensor with explicit shape and row-major (last index fastest)
/// flat storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and a flat value buffer.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(CoreError::InvalidArgument(
                "tensor order must be >= 1".into(),
            ));
        }
        if shape.contains(&0) {
            return Err(CoreError::InvalidArgument(format!(
                "all extents must be >= 1, got {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(CoreError::InvalidArgument(format!(
                "value buffer length {} does not match shape product {}",
                values.len(),
                expect
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat offset of a multi-index under the canonical layout.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        flat_index(&self.shape, idx)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Row-major flat offset of `idx` in a tensor of shape `shape`
/// (last index fastest). Inverse of [`multi_index`].
pub fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    let mut flat = 0;
    for (i, e) in idx.iter().zip(shape) {
        debug_assert!(i < e);
        flat = flat * e + i;
    }
    flat
}

/// Multi-index corresponding to a row-major flat offset. Inverse of
/// [`flat_index`].
pub fn multi_index(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    idx
}

/// Sum of entrywise products of two same-shape tensors.
pub fn inner_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.shape != b.shape {
        return Err(CoreError::ShapeMismatch {
            context: "inner_product".into(),
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

pub fn frobenius_norm(a: &DenseTensor) -> f64 {
    a.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn l1_norm(a: &DenseTensor) -> f64 {
    a.values.iter().map(|v| v.abs()).sum()
}

/// Tensor (outer) product of N vectors; entry `(i_1, ..., i_N)` is the
/// product of the corresponding vector entries.
pub fn outer_product(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(CoreError::InvalidArgument(
            "outer_product needs at least one vector".into(),
        ));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(CoreError::InvalidArgument(
            "outer_product vectors must be nonempty".into(),
        ));
    }
    // Repeated expansion keeps the canonical layout: later vectors vary fastest.
    let mut acc = vec![1.0f64];
    for v in vectors {
        let mut next = Vec::with_capacity(acc.len() * v.len());
        for a in &acc {
            for x in v {
                next.push(a * x);
            }
        }
        acc = next;
    }
    DenseTensor::new(vectors.iter().map(|v| v.len()).collect(), acc)
}

/// Contraction of mode `mode` (zero-based) with a vector `u`; the output
/// drops that mode. Contracting an order-1 tensor yields a 1-entry tensor.
pub fn n_mode_product(a: &DenseTensor, u: &[f64], mode: usize) -> Result<DenseTensor> {
    if mode >= a.order() {
        return Err(CoreError::ModeOutOfRange {
            mode,
            order: a.order(),
        });
    }
    if u.len() != a.shape[mode] {
        return Err(CoreError::ShapeMismatch {
            context: format!("n_mode_product along mode {mode}"),
            left: a.shape.clone(),
            right: vec![u.len()],
        });
    }
    let outer: usize = a.shape[..mode].iter().product();
    let extent = a.shape[mode];
    let inner: usize = a.shape[mode + 1..].iter().product();
    let mut out_shape: Vec<usize> = a
        .shape
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != mode)
        .map(|(_, &e)| e)
        .collect();
    if out_shape.is_empty() {
        out_shape.push(1); // order-0 result kept as a 1-entry tensor
    }
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for (i, &ui) in u.iter().enumerate().take(extent) {
            if ui == 0.0 {
                continue;
            }
            let base = (o * extent + i) * inner;
            let dst = o * inner;
            for r in 0..inner {
                out[dst + r] += ui * a.values[base + r];
            }
        }
    }
    DenseTensor::new(out_shape, out)
}

/// Fully contracts `a` with one vector per mode, returning the scalar
/// `<a, v_1 o ... o v_N>`.
pub fn contract_all(a: &DenseTensor, vectors: &[Vec<f64>]) -> Result<f64> {
    if vectors.len() != a.order() {
        return Err(CoreError::InvalidArgument(format!(
            "expected {} vectors, got {}",
            a.order(),
            vectors.len()
        )));
    }
    let mut t = a.clone();
    for v in vectors {
        t = n_mode_product(&t, v, 0)?;
    }
    debug_assert_eq!(t.len(), 1);
    Ok(t.values[0])
}

/// Last-mode matricization of a stacked tensor: a `(prod I_n) x M` matrix
/// whose column `m` is the row-major vectorization of sample `m`.
///
/// Row index `i` corresponds to the entry multi-index `multi_index(entry_shape, i)`;
/// the buffer is row-major, so row `i` is the contiguous slice
/// `values[i*M..(i+1)*M]`. Under the canonical layout this is a plain copy of
/// the input buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Matricized {
    pub rows: usize,
    pub cols: usize,
    /// Row-major buffer, `rows * cols` long.
    pub values: Vec<f64>,
}

impl Matricized {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

pub fn matricize_last_mode(x: &DenseTensor) -> Result<Matricized> {
    if x.order() < 2 {
        return Err(CoreError::InvalidArgument(
            "matricize_last_mode needs an order >= 2 tensor".into(),
        ));
    }
    let m = *x.shape.last().unwrap();
    let rows = x.len() / m;
    Ok(Matricized {
        rows,
        cols: m,
        values: x.values.clone(),
    })
}

/// Inverse of [`matricize_last_mode`] for a given entry shape.
pub fn dematricize(m: &Matricized, entry_shape: &[usize]) -> Result<DenseTensor> {
    let expect: usize = entry_shape.iter().product();
    if expect != m.rows {
        return Err(CoreError::ShapeMismatch {
            context: "dematricize".into(),
            left: entry_shape.to_vec(),
            right: vec![m.rows],
        });
    }
    let mut shape = entry_shape.to_vec();
    shape.push(m.cols);
    DenseTensor::new(shape, m.values.clone())
}

/// One sparse rank-1 term `sigma * w_1 o ... o w_N` with `sigma >= 0` and
/// every factor carrying unit l1 norm whenever `sigma > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRankTerm {
    pub sigma: f64,
    pub factors: Vec<Vec<f64>>,
}

impl UnitRankTerm {
    /// Validating constructor: factors must be l1-normalized when `sigma > 0`.
    pub fn new(sigma: f64, factors: Vec<Vec<f64>>) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        if factors.is_empty() || factors.iter().any(|f| f.is_empty()) {
            return Err(CoreError::InvalidArgument(
                "unit-rank term needs at least one nonempty factor per mode".into(),
            ));
        }
        if sigma > 0.0 {
            for (n, f) in factors.iter().enumerate() {
                let l1: f64 = f.iter().map(|v| v.abs()).sum();
                if (l1 - 1.0).abs() > UNIT_L1_TOL {
                    return Err(CoreError::InvalidArgument(format!(
                        "factor {n} has l1 norm {l1}, expected 1"
                    )));
                }
            }
        }
        Ok(Self { sigma, factors })
    }

    /// The zero tensor of the given entry shape.
    pub fn zero(shape: &[usize]) -> Self {
        Self {
            sigma: 0.0,
            factors: shape.iter().map(|&e| vec![0.0; e]).collect(),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.len()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.sigma == 0.0
    }

    /// Dense tensor `sigma * w_1 o ... o w_N`. A zero-scale term materializes
    /// to the zero tensor regardless of its factors.
    pub fn materialize(&self) -> Result<DenseTensor> {
        if self.sigma == 0.0 {
            return DenseTensor::zeros(self.shape());
        }
        let mut t = outer_product(&self.factors)?;
        for v in t.values.iter_mut() {
            *v *= self.sigma;
        }
        Ok(t)
    }
}

/// Sum of materialized unit-rank terms; `shape` disambiguates the empty list.
pub fn cp_sum(terms: &[UnitRankTerm], shape: &[usize]) -> Result<DenseTensor> {
    let mut acc = DenseTensor::zeros(shape.to_vec())?;
    for term in terms {
        if term.shape() != shape {
            return Err(CoreError::ShapeMismatch {
                context: "cp_sum".into(),
                left: shape.to_vec(),
                right: term.shape(),
            });
        }
        let t = term.materialize()?;
        for (a, b) in acc.values_mut().iter_mut().zip(t.values()) {
            *a += b;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Contraction kernels over stacked sample tensors (shape (I_1,...,I_N, M)).
// Thanks to the canonical layout the M samples of one predictor entry are
// contiguous, so all kernels stream over length-M slices.
// ---------------------------------------------------------------------------

/// Iterates multi-indices of `shape` in row-major order, calling
/// `f(flat, idx)` for each.
fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..total {
        f(flat, &idx);
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn check_stacked(x: &DenseTensor, factors: &[Vec<f64>]) -> Result<()> {
    if x.order() != factors.len() + 1 {
        return Err(CoreError::InvalidArgument(format!(
            "stacked tensor of order {} needs {} factors, got {}",
            x.order(),
            x.order() - 1,
            factors.len()
        )));
    }
    for (n, f) in factors.iter().enumerate() {
        if f.len() != x.shape()[n] {
            return Err(CoreError::ShapeMismatch {
                context: format!("factor {n} against stacked tensor"),
                left: x.shape().to_vec(),
                right: vec![f.len()],
            });
        }
    }
    Ok(())
}

/// Contracts the stacked tensor with every factor except mode `skip`,
/// producing the `I_skip x M` matrix `Z^(-skip)` (row-major, row = index in
/// mode `skip`). Zero factor entries are skipped, so sparse factors pay only
/// for their support.
pub fn contract_samples_except(
    x: &DenseTensor,
    factors: &[Vec<f64>],
    skip: usize,
) -> Result<Vec<f64>> {
    check_stacked(x, factors)?;
    let n_modes = factors.len();
    if skip >= n_modes {
        return Err(CoreError::ModeOutOfRange {
            mode: skip,
            order: n_modes,
        });
    }
    let entry_shape = &x.shape()[..n_modes];
    let m = *x.shape().last().unwrap();
    let mut out = vec![0.0; entry_shape[skip] * m];
    for_each_index(entry_shape, |flat, idx| {
        let mut coef = 1.0;
        for (l, f) in factors.iter().enumerate() {
            if l != skip {
                coef *= f[idx[l]];
                if coef == 0.0 {
                    return;
                }
            }
        }
        let src = &x.values()[flat * m..(flat + 1) * m];
        let dst = &mut out[idx[skip] * m..(idx[skip] + 1) * m];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += coef * s;
        }
    });
    Ok(out)
}

/// Like [`contract_samples_except`], but additionally pins mode `pinned` at
/// `pinned_index` and leaves it out of the coefficient product. Returns the
/// `I_keep x M` slice contraction used by the incremental cache update.
pub fn contract_samples_except_pair(
    x: &DenseTensor,
    factors: &[Vec<f64>],
    keep: usize,
    pinned: usize,
    pinned_index: usize,
) -> Result<Vec<f64>> {
    check_stacked(x, factors)?;
    let n_modes = factors.len();
    if keep >= n_modes || pinned >= n_modes || keep == pinned {
        return Err(CoreError::InvalidArgument(format!(
            "bad mode pair keep={keep} pinned={pinned} for {n_modes} modes"
        )));
    }
    let entry_shape = &x.shape()[..n_modes];
    let m = *x.shape().last().unwrap();
    let mut out = vec![0.0; entry_shape[keep] * m];
    for_each_index(entry_shape, |flat, idx| {
        if idx[pinned] != pinned_index {
            return;
        }
        let mut coef = 1.0;
        for (l, f) in factors.iter().enumerate() {
            if l != keep && l != pinned {
                coef *= f[idx[l]];
                if coef == 0.0 {
                    return;
                }
            }
        }
        let src = &x.values()[flat * m..(flat + 1) * m];
        let dst = &mut out[idx[keep] * m..(idx[keep] + 1) * m];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += coef * s;
        }
    });
    Ok(out)
}

/// Per-sample predictions `<X^m, sigma * w_1 o ... o w_N>` of a unit-rank
/// term over a stacked tensor.
pub fn predict_samples(x: &DenseTensor, term: &UnitRankTerm) -> Result<Vec<f64>> {
    check_stacked(x, &term.factors)?;
    let m = *x.shape().last().unwrap();
    let mut out = vec![0.0; m];
    if term.sigma == 0.0 {
        return Ok(out);
    }
    let entry_shape = &x.shape()[..term.factors.len()];
    for_each_index(entry_shape, |flat, idx| {
        let mut coef = term.sigma;
        for (f, &i) in term.factors.iter().zip(idx) {
            coef *= f[i];
            if coef == 0.0 {
                return;
            }
        }
        let src = &x.values()[flat * m..(flat + 1) * m];
        for (d, s) in out.iter_mut().zip(src) {
            *d += coef * s;
        }
    });
    Ok(out)
}
