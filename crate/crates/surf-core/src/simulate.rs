//! Synthetic benchmark generator: correlated Gaussian grid predictors, a
//! planted sparse low-rank coefficient tensor, and Gaussian response noise.
//!
//! Feature grids are square (`I x I`, optionally `I x I x I`); the
//! correlation between two grid positions decays as `base^d` with `d` their
//! Euclidean distance. Samples are drawn through a symmetric PSD square root
//! of that covariance (eigendecomposition with negative eigenvalues clipped
//! at zero). The planted coefficient sums `R` l1-normalized Gaussian factor
//! outer products with weights `1/r`, then a uniformly random `S%` of its
//! entries are forced to zero.
//!
//! All draws come from one seeded ChaCha generator with fixed stream splits:
//! stream 0 feeds the predictor draws, 1 the truth factors, 2 the response
//! noise, 3 the sparsity mask. Identical specs therefore yield bit-identical
//! data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, TensorDataset};
use crate::error::{CoreError, Result};
use crate::tensor::{DenseTensor, UnitRankTerm};

const STREAM_PREDICTORS: u64 = 0;
const STREAM_FACTORS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_MASK: u64 = 3;

/// Benchmark instance parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    /// Sample count.
    pub m: usize,
    /// Side length of the square feature grid.
    pub i: usize,
    /// Rank of the planted coefficient before sparsification.
    pub r: usize,
    /// Percentage of coefficient entries forced to zero, in [0, 100).
    pub s: f64,
    pub noise_sd: f64,
    pub correlation_base: f64,
    /// Grid order: 2 for I x I (the standard study), 3 for the I x I x I
    /// extension.
    pub order: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(m: usize, i: usize, r: usize, s: f64, seed: u64) -> Self {
        Self {
            m,
            i,
            r,
            s,
            noise_sd: 1.0,
            correlation_base: 0.6,
            order: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.i < 2 || self.r < 1 {
            return Err(CoreError::InvalidArgument(format!(
                "need m >= 2, i >= 2, r >= 1; got m={} i={} r={}",
                self.m, self.i, self.r
            )));
        }
        if !(0.0..100.0).contains(&self.s) {
            return Err(CoreError::InvalidArgument(format!(
                "sparsity percentage must be in [0, 100), got {}",
                self.s
            )));
        }
        if self.noise_sd.is_nan()
            || self.noise_sd < 0.0
            || self.correlation_base.is_nan()
            || self.correlation_base <= 0.0
            || self.correlation_base >= 1.0
        {
            return Err(CoreError::InvalidArgument(
                "need noise_sd >= 0 and correlation_base in (0, 1)".into(),
            ));
        }
        if self.order != 2 && self.order != 3 {
            return Err(CoreError::InvalidArgument(format!(
                "grid order must be 2 or 3, got {}",
                self.order
            )));
        }
        Ok(())
    }

    pub fn entry_shape(&self) -> Vec<usize> {
        vec![self.i; self.order]
    }

    pub fn num_entries(&self) -> usize {
        self.i.pow(self.order as u32)
    }
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SquareMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n + c]
    }
}

/// Grid covariance: entry for positions `p`, `q` is `base^(euclidean(p, q))`.
/// Grid positions are enumerated row-major, matching the coefficient layout.
pub fn gen_covariance(i: usize, order: usize, base: f64) -> SquareMatrix {
    let n = i.pow(order as u32);
    let mut values = vec![0.0; n * n];
    let coords: Vec<Vec<usize>> = (0..n)
        .map(|f| crate::tensor::multi_index(&vec![i; order], f))
        .collect();
    for a in 0..n {
        for b in a..n {
            let d2: f64 = coords[a]
                .iter()
                .zip(&coords[b])
                .map(|(&x, &y)| {
                    let d = x as f64 - y as f64;
                    d * d
                })
                .sum();
            let v = if a == b { 1.0 } else { base.powf(d2.sqrt()) };
            values[a * n + b] = v;
            values[b * n + a] = v;
        }
    }
    SquareMatrix { n, values }
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// (numerical noise) are clipped at zero. Returns `L` with `L L' = cov`.
pub fn psd_factor(cov: &SquareMatrix) -> SquareMatrix {
    let n = cov.n;
    let m = nalgebra::DMatrix::from_row_slice(n, n, &cov.values);
    let eig = nalgebra::SymmetricEigen::new(m);
    let sqrt_vals = eig
        .eigenvalues
        .map(|v| if v > 0.0 { v.sqrt() } else { 0.0 });
    let l = &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&sqrt_vals);
    let mut values = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            values[r * n + c] = l[(r, c)];
        }
    }
    SquareMatrix { n, values }
}

/// Planted coefficient: the sparsified tensor plus the pre-sparsification
/// unit-rank terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub w: DenseTensor,
    pub terms: Vec<UnitRankTerm>,
    pub spec: SimSpec,
}

fn normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| StandardNormal.sample(rng)).collect()
}

/// Builds the planted coefficient from `r` l1-normalized Gaussian factor
/// tuples with weights `1/r`, then zeroes `floor(s% * entries)` uniformly
/// chosen entries.
pub fn gen_truth(spec: &SimSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut factor_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    factor_rng.set_stream(STREAM_FACTORS);
    let mut terms = Vec::with_capacity(spec.r);
    for r in 1..=spec.r {
        let mut factors = Vec::with_capacity(spec.order);
        for _ in 0..spec.order {
            let mut f = normals(&mut factor_rng, spec.i);
            let l1: f64 = f.iter().map(|v| v.abs()).sum();
            if l1 == 0.0 {
                return Err(CoreError::InvalidArgument(
                    "degenerate all-zero factor draw".into(),
                ));
            }
            f.iter_mut().for_each(|v| *v /= l1);
            factors.push(f);
        }
        terms.push(UnitRankTerm::new(1.0 / r as f64, factors)?);
    }
    let mut w = crate::tensor::cp_sum(&terms, &spec.entry_shape())?;

    let entries = spec.num_entries();
    let zero_count = (spec.s / 100.0 * entries as f64).floor() as usize;
    if zero_count > 0 {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        mask_rng.set_stream(STREAM_MASK);
        // Partial Fisher-Yates: the first zero_count slots are the chosen entries.
        let mut order: Vec<usize> = (0..entries).collect();
        for k in 0..zero_count {
            let j = mask_rng.gen_range(k..entries);
            order.swap(k, j);
        }
        let values = w.values_mut();
        for &e in &order[..zero_count] {
            values[e] = 0.0;
        }
    }
    Ok(GroundTruth {
        w,
        terms,
        spec: spec.clone(),
    })
}

/// Raw (unstandardized) draw: stacked predictors and response.
#[derive(Debug, Clone)]
pub struct RawSim {
    pub x: DenseTensor,
    pub y: Vec<f64>,
}

impl RawSim {
    /// Splits samples into a leading block of `m_first` and the rest.
    pub fn split(&self, m_first: usize) -> Result<(RawSim, RawSim)> {
        let m = self.y.len();
        if m_first == 0 || m_first >= m {
            return Err(CoreError::InvalidArgument(format!(
                "split point {m_first} out of range for {m} samples"
            )));
        }
        let entries = self.x.len() / m;
        let entry_shape = &self.x.shape()[..self.x.order() - 1];
        let mut a = vec![0.0; entries * m_first];
        let mut b = vec![0.0; entries * (m - m_first)];
        for i in 0..entries {
            let row = &self.x.values()[i * m..(i + 1) * m];
            a[i * m_first..(i + 1) * m_first].copy_from_slice(&row[..m_first]);
            b[i * (m - m_first)..(i + 1) * (m - m_first)].copy_from_slice(&row[m_first..]);
        }
        let mut sa = entry_shape.to_vec();
        sa.push(m_first);
        let mut sb = entry_shape.to_vec();
        sb.push(m - m_first);
        Ok((
            RawSim {
                x: DenseTensor::new(sa, a)?,
                y: self.y[..m_first].to_vec(),
            },
            RawSim {
                x: DenseTensor::new(sb, b)?,
                y: self.y[m_first..].to_vec(),
            },
        ))
    }
}

/// Draws the raw benchmark data: `M` correlated Gaussian samples, responses
/// `<X^m, W> + noise`. Fully determined by the instance parameters.
pub fn gen_raw(spec: &SimSpec) -> Result<(RawSim, GroundTruth)> {
    spec.validate()?;
    let truth = gen_truth(spec)?;
    let entries = spec.num_entries();
    let l = psd_factor(&gen_covariance(spec.i, spec.order, spec.correlation_base));

    let mut x_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    x_rng.set_stream(STREAM_PREDICTORS);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(STREAM_NOISE);

    let mut shape = spec.entry_shape();
    shape.push(spec.m);
    let mut x = DenseTensor::zeros(shape)?;
    let mut y = vec![0.0; spec.m];
    for s in 0..spec.m {
        let z = normals(&mut x_rng, entries);
        let values = x.values_mut();
        for row in 0..entries {
            let mut v = 0.0;
            for (c, zv) in z.iter().enumerate() {
                v += l.values[row * entries + c] * zv;
            }
            values[row * spec.m + s] = v;
        }
    }
    for (s, yv) in y.iter_mut().enumerate() {
        let mut dot = 0.0;
        for row in 0..entries {
            dot += truth.w.values()[row] * x.values()[row * spec.m + s];
        }
        let noise: f64 = StandardNormal.sample(&mut noise_rng);
        *yv = dot + spec.noise_sd * noise;
    }
    Ok((RawSim { x, y }, truth))
}

/// Standardized dataset plus ground truth for a spec.
pub fn gen_dataset(spec: &SimSpec) -> Result<(TensorDataset, GroundTruth)> {
    let (raw, truth) = gen_raw(spec)?;
    Ok((standardize(&raw.x, &raw.y)?, truth))
}
