//! Dataset ingestion, standardization, and the `surf-ds-v1` on-disk format.
//!
//! Solvers only ever see standardized data: the response is centered and each
//! predictor entry is centered and scaled to unit second moment
//! (`sum_m x^2 / M = 1`, population scaling). Entries with zero raw variance
//! are standardized to exactly 0 and flagged, so no solver can select them.
//!
//! On disk a dataset is a JSON manifest next to raw little-endian `f64`
//! payload files:
//!
//! ```text
//! dataset.json   {"format":"surf-ds-v1","shape":[I1,...,IN],"m":M,
//!                 "x_file":"x.f64","y_file":"y.f64","layout":"row-major",
//!                 "standardized":true,"std_file":"std.f64"}
//! x.f64          M contiguous samples, each a row-major (I1,...,IN) block
//! y.f64          M values
//! std.f64        y_mean, entry means (prod I), entry scales (prod I),
//!                zero-variance mask (prod I, 0.0/1.0)   [standardized only]
//! ```
//!
//! Note the payload stores samples contiguously while the in-memory stacked
//! tensor keeps the sample index fastest; save/load transposes between the
//! two. A manifest with `"standardized": false` carries raw payloads and is
//! standardized on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::tensor::DenseTensor;

pub const DATASET_FORMAT: &str = "surf-ds-v1";

/// Everything needed to map new raw samples into the standardized space and
/// predictions back (`y_raw_hat = y_std_hat + y_mean`).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationRecord {
    pub y_mean: f64,
    pub entry_means: DenseTensor,
    /// `sqrt(sum (x - mean)^2 / M)`, forced to 1 where the variance is zero.
    pub entry_scales: DenseTensor,
    pub zero_variance_mask: Vec<bool>,
}

impl StandardizationRecord {
    /// Identity record (no centering, no scaling) for data that is already on
    /// the standardized scale.
    pub fn identity(entry_shape: &[usize]) -> Result<Self> {
        let n: usize = entry_shape.iter().product();
        Ok(Self {
            y_mean: 0.0,
            entry_means: DenseTensor::zeros(entry_shape.to_vec())?,
            entry_scales: DenseTensor::new(entry_shape.to_vec(), vec![1.0; n])?,
            zero_variance_mask: vec![false; n],
        })
    }

    pub fn entry_shape(&self) -> &[usize] {
        self.entry_means.shape()
    }

    /// Maps standardized stacked samples back to the raw scale. Zero-variance
    /// entries recover their constant raw value (the stored mean).
    pub fn invert_stacked(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let entries = self.entry_means.len();
        if x.order() != self.entry_shape().len() + 1
            || &x.shape()[..x.order() - 1] != self.entry_shape()
        {
            return Err(CoreError::ShapeMismatch {
                context: "standardization record against standardized samples".into(),
                left: self.entry_shape().to_vec(),
                right: x.shape().to_vec(),
            });
        }
        let m = *x.shape().last().unwrap();
        let mut out = x.clone();
        let values = out.values_mut();
        for i in 0..entries {
            let row = &mut values[i * m..(i + 1) * m];
            let mean = self.entry_means.values()[i];
            if self.zero_variance_mask[i] {
                row.fill(mean);
            } else {
                let scale = self.entry_scales.values()[i];
                for v in row.iter_mut() {
                    *v = *v * scale + mean;
                }
            }
        }
        Ok(out)
    }

    /// Standardizes a stacked raw tensor of shape `(I_1,...,I_N, M)`.
    pub fn apply_stacked(&self, raw_x: &DenseTensor) -> Result<DenseTensor> {
        let entries = self.entry_means.len();
        if raw_x.order() != self.entry_shape().len() + 1
            || &raw_x.shape()[..raw_x.order() - 1] != self.entry_shape()
        {
            return Err(CoreError::ShapeMismatch {
                context: "standardization record against raw samples".into(),
                left: self.entry_shape().to_vec(),
                right: raw_x.shape().to_vec(),
            });
        }
        let m = *raw_x.shape().last().unwrap();
        let mut out = raw_x.clone();
        let values = out.values_mut();
        for i in 0..entries {
            let row = &mut values[i * m..(i + 1) * m];
            if self.zero_variance_mask[i] {
                row.fill(0.0);
            } else {
                let mean = self.entry_means.values()[i];
                let scale = self.entry_scales.values()[i];
                for v in row.iter_mut() {
                    *v = (*v - mean) / scale;
                }
            }
        }
        Ok(out)
    }
}

/// Standardized stacked predictors plus centered response.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDataset {
    x: DenseTensor,
    y: Vec<f64>,
    std: StandardizationRecord,
}

impl TensorDataset {
    /// Wraps data that is already on the standardized scale with an identity
    /// record. Used for hand-built test problems and fold subsets.
    pub fn from_standardized(x: DenseTensor, y: Vec<f64>) -> Result<Self> {
        let m = *x.shape().last().unwrap();
        if x.order() < 2 {
            return Err(CoreError::InvalidArgument(
                "stacked tensor must have order >= 2 (entries + sample mode)".into(),
            ));
        }
        if y.len() != m {
            return Err(CoreError::ShapeMismatch {
                context: "response length against sample mode".into(),
                left: x.shape().to_vec(),
                right: vec![y.len()],
            });
        }
        let std = StandardizationRecord::identity(&x.shape()[..x.order() - 1])?;
        Ok(Self { x, y, std })
    }

    pub fn from_parts(x: DenseTensor, y: Vec<f64>, std: StandardizationRecord) -> Result<Self> {
        let mut ds = Self::from_standardized(x, y)?;
        if std.entry_shape() != ds.entry_shape() {
            return Err(CoreError::ShapeMismatch {
                context: "standardization record shape".into(),
                left: std.entry_shape().to_vec(),
                right: ds.entry_shape().to_vec(),
            });
        }
        ds.std = std;
        Ok(ds)
    }

    pub fn x(&self) -> &DenseTensor {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn std(&self) -> &StandardizationRecord {
        &self.std
    }

    pub fn entry_shape(&self) -> &[usize] {
        &self.x.shape()[..self.x.order() - 1]
    }

    pub fn num_entries(&self) -> usize {
        self.entry_shape().iter().product()
    }

    pub fn num_samples(&self) -> usize {
        *self.x.shape().last().unwrap()
    }

    /// Same predictors, different response (used by deflation residuals).
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.num_samples() {
            return Err(CoreError::ShapeMismatch {
                context: "replacement response length".into(),
                left: vec![self.num_samples()],
                right: vec![y.len()],
            });
        }
        Ok(Self {
            x: self.x.clone(),
            y,
            std: self.std.clone(),
        })
    }

    /// Sample subset (CV folds). Keeps the parent standardization record;
    /// values are not re-standardized.
    pub fn subset(&self, sample_indices: &[usize]) -> Result<Self> {
        let m_old = self.num_samples();
        let m_new = sample_indices.len();
        if m_new == 0 {
            return Err(CoreError::InvalidArgument("empty sample subset".into()));
        }
        let entries = self.num_entries();
        let mut values = vec![0.0; entries * m_new];
        for i in 0..entries {
            let src = &self.x.values()[i * m_old..(i + 1) * m_old];
            let dst = &mut values[i * m_new..(i + 1) * m_new];
            for (k, &s) in sample_indices.iter().enumerate() {
                dst[k] = src[s];
            }
        }
        let mut shape = self.entry_shape().to_vec();
        shape.push(m_new);
        Ok(Self {
            x: DenseTensor::new(shape, values)?,
            y: sample_indices.iter().map(|&s| self.y[s]).collect(),
            std: self.std.clone(),
        })
    }
}

/// Centers the response and standardizes every predictor entry over the
/// sample mode (population scaling, `sum x^2 / M = 1` for entries with
/// nonzero variance). Zero-variance entries become exactly 0 and are flagged.
pub fn standardize(raw_x: &DenseTensor, raw_y: &[f64]) -> Result<TensorDataset> {
    if raw_x.order() < 2 {
        return Err(CoreError::InvalidArgument(
            "stacked tensor must have order >= 2 (entries + sample mode)".into(),
        ));
    }
    let m = *raw_x.shape().last().unwrap();
    if raw_y.len() != m {
        return Err(CoreError::ShapeMismatch {
            context: "raw response length against sample mode".into(),
            left: raw_x.shape().to_vec(),
            right: vec![raw_y.len()],
        });
    }
    if m < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "need at least 2 samples to standardize, got {m}"
        )));
    }
    if raw_x.values().iter().any(|v| !v.is_finite()) || raw_y.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidArgument(
            "non-finite values in raw data".into(),
        ));
    }

    let entry_shape = raw_x.shape()[..raw_x.order() - 1].to_vec();
    let entries: usize = entry_shape.iter().product();
    let mf = m as f64;

    let y_mean = raw_y.iter().sum::<f64>() / mf;
    let y: Vec<f64> = raw_y.iter().map(|v| v - y_mean).collect();

    let mut means = vec![0.0; entries];
    let mut scales = vec![1.0; entries];
    let mut mask = vec![false; entries];
    for i in 0..entries {
        let row = &raw_x.values()[i * m..(i + 1) * m];
        let mean = row.iter().sum::<f64>() / mf;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / mf;
        means[i] = mean;
        if var > 0.0 {
            scales[i] = var.sqrt();
        } else {
            mask[i] = true;
        }
    }
    let std = StandardizationRecord {
        y_mean,
        entry_means: DenseTensor::new(entry_shape.clone(), means)?,
        entry_scales: DenseTensor::new(entry_shape, scales)?,
        zero_variance_mask: mask,
    };
    let x = std.apply_stacked(raw_x)?;
    Ok(TensorDataset { x, y, std })
}

// ---------------------------------------------------------------------------
// surf-ds-v1 persistence
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    format: String,
    shape: Vec<usize>,
    m: usize,
    x_file: String,
    y_file: String,
    layout: String,
    standardized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_file: Option<String>,
}

pub(crate) fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads exactly `expect` little-endian f64 values; shorter files are
/// reported as truncation, longer files as a shape mismatch.
pub(crate) fn read_f64s_exact(path: &Path, expect: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    let name = path.display().to_string();
    if bytes.len() < expect * 8 || bytes.len() % 8 != 0 {
        return Err(CoreError::TruncatedPayload {
            file: name,
            expected: expect * 8,
            found: bytes.len(),
        });
    }
    if bytes.len() > expect * 8 {
        return Err(CoreError::PayloadShapeMismatch {
            file: name,
            expected: expect,
            found: bytes.len() / 8,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Transposes the in-memory stacked layout (sample index fastest) into the
/// file layout (samples contiguous, each row-major).
fn stacked_to_sample_major(x: &DenseTensor) -> Vec<f64> {
    let m = *x.shape().last().unwrap();
    let entries = x.len() / m;
    let mut out = vec![0.0; x.len()];
    for i in 0..entries {
        for s in 0..m {
            out[s * entries + i] = x.values()[i * m + s];
        }
    }
    out
}

fn sample_major_to_stacked(values: &[f64], entry_shape: &[usize], m: usize) -> Result<DenseTensor> {
    let entries: usize = entry_shape.iter().product();
    let mut out = vec![0.0; values.len()];
    for s in 0..m {
        for i in 0..entries {
            out[i * m + s] = values[s * entries + i];
        }
    }
    let mut shape = entry_shape.to_vec();
    shape.push(m);
    DenseTensor::new(shape, out)
}

/// Writes `dataset.json` plus payload files into `dir`. The stored payload is
/// the standardized data (`"standardized": true`).
pub fn save(dataset: &TensorDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        shape: dataset.entry_shape().to_vec(),
        m: dataset.num_samples(),
        x_file: "x.f64".into(),
        y_file: "y.f64".into(),
        layout: "row-major".into(),
        standardized: true,
        std_file: Some("std.f64".into()),
    };
    write_f64s(&dir.join("x.f64"), &stacked_to_sample_major(&dataset.x))?;
    write_f64s(&dir.join("y.f64"), &dataset.y)?;
    let std = &dataset.std;
    let mut rec = Vec::with_capacity(1 + 3 * std.entry_means.len());
    rec.push(std.y_mean);
    rec.extend_from_slice(std.entry_means.values());
    rec.extend_from_slice(std.entry_scales.values());
    rec.extend(
        std.zero_variance_mask
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 }),
    );
    write_f64s(&dir.join("std.f64"), &rec)?;
    fs::write(
        dir.join("dataset.json"),
        serde_json::to_vec_pretty(&manifest).map_err(|e| CoreError::Manifest(e.to_string()))?,
    )?;
    Ok(())
}

/// Loads a `surf-ds-v1` dataset from a directory or a manifest path. Raw
/// payloads (`"standardized": false`) are standardized on load.
pub fn load(path: &Path) -> Result<TensorDataset> {
    let manifest_path: PathBuf = if path.is_dir() {
        path.join("dataset.json")
    } else {
        path.to_path_buf()
    };
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let text = fs::read_to_string(&manifest_path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| CoreError::Manifest(e.to_string()))?;
    if manifest.format != DATASET_FORMAT {
        return Err(CoreError::Manifest(format!(
            "unsupported format {:?}",
            manifest.format
        )));
    }
    if manifest.layout != "row-major" {
        return Err(CoreError::Manifest(format!(
            "unsupported layout {:?}",
            manifest.layout
        )));
    }
    if manifest.shape.is_empty() || manifest.shape.contains(&0) || manifest.m == 0 {
        return Err(CoreError::Manifest(format!(
            "bad shape {:?} / m {}",
            manifest.shape, manifest.m
        )));
    }
    let entries: usize = manifest.shape.iter().product();
    let x_vals = read_f64s_exact(&dir.join(&manifest.x_file), entries * manifest.m)?;
    let y = read_f64s_exact(&dir.join(&manifest.y_file), manifest.m)?;
    let x = sample_major_to_stacked(&x_vals, &manifest.shape, manifest.m)?;

    if manifest.standardized {
        let std_file = manifest
            .std_file
            .as_deref()
            .ok_or_else(|| CoreError::Manifest("standardized dataset without std_file".into()))?;
        let rec = read_f64s_exact(&dir.join(std_file), 1 + 3 * entries)?;
        let std = StandardizationRecord {
            y_mean: rec[0],
            entry_means: DenseTensor::new(manifest.shape.clone(), rec[1..1 + entries].to_vec())?,
            entry_scales: DenseTensor::new(
                manifest.shape.clone(),
                rec[1 + entries..1 + 2 * entries].to_vec(),
            )?,
            zero_variance_mask: rec[1 + 2 * entries..].iter().map(|&v| v != 0.0).collect(),
        };
        TensorDataset::from_parts(x, y, std)
    } else {
        standardize(&x, &y)
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_raw(shape: &[usize], m: usize, seed: u64) -> (DenseTensor, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut full = shape.to_vec();
        full.push(m);
        let total: usize = full.iter().product();
        let x =
            DenseTensor::new(full, (0..total).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        (x, y)
    }

    #[test]
    fn centering_example() {
        let x = DenseTensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let ds = standardize(&x, &[1.0, 3.0]).unwrap();
        assert_eq!(ds.std().y_mean, 2.0);
        assert_eq!(ds.y(), &[-1.0, 1.0]);
    }

    #[test]
    fn constant_entry_is_zeroed_and_flagged() {
        // Entry (0): constant 7 across samples; entry (1): varying.
        let x = DenseTensor::new(vec![2, 2], vec![7.0, 7.0, 0.0, 2.0]).unwrap();
        let ds = standardize(&x, &[0.0, 1.0]).unwrap();
        assert!(ds.std().zero_variance_mask[0]);
        assert!(!ds.std().zero_variance_mask[1]);
        assert_eq!(&ds.x().values()[0..2], &[0.0, 0.0]);
        assert_eq!(ds.std().entry_scales.values()[0], 1.0);
    }

    #[test]
    fn hand_standardization_example() {
        // raw entry values (0, 2) over M=2: mean 1, scale 1, standardized (-1, 1).
        let x = DenseTensor::new(vec![1, 2], vec![0.0, 2.0]).unwrap();
        let ds = standardize(&x, &[0.0, 0.0]).unwrap();
        assert_eq!(ds.std().entry_means.values()[0], 1.0);
        assert_eq!(ds.std().entry_scales.values()[0], 1.0);
        assert_eq!(ds.x().values(), &[-1.0, 1.0]);
        let second_moment: f64 =
            ds.x().values().iter().map(|v| v * v).sum::<f64>() / ds.num_samples() as f64;
        assert!((second_moment - 1.0).abs() < 1e-6);
    }

    #[test]
    fn standardization_invariants_on_random_data() {
        let (x, y) = random_raw(&[3, 4], 10, 7);
        let ds = standardize(&x, &y).unwrap();
        let m = ds.num_samples() as f64;
        let ysum: f64 = ds.y().iter().sum();
        assert!(ysum.abs() <= 1e-8 * m);
        for i in 0..ds.num_entries() {
            let row = &ds.x().values()[i * 10..(i + 1) * 10];
            let s: f64 = row.iter().sum();
            let sq: f64 = row.iter().map(|v| v * v).sum::<f64>() / m;
            assert!(s.abs() <= 1e-8 * m, "entry {i} mean {s}");
            assert!((sq - 1.0).abs() <= 1e-6, "entry {i} second moment {sq}");
        }
    }

    #[test]
    fn record_reapplication_is_exact() {
        let (x, y) = random_raw(&[2, 3], 8, 9);
        let ds = standardize(&x, &y).unwrap();
        let again = ds.std().apply_stacked(&x).unwrap();
        assert_eq!(again, *ds.x());
    }

    #[test]
    fn inversion_recovers_raw_values() {
        let (mut x, y) = random_raw(&[2, 3], 8, 19);
        // Force one constant entry to exercise the zero-variance branch.
        let vals = x.values_mut();
        for s in 0..8 {
            vals[s] = 4.5;
        }
        let ds = standardize(&x, &y).unwrap();
        let raw_back = ds.std().invert_stacked(ds.x()).unwrap();
        for (a, b) in raw_back.values().iter().zip(x.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(&raw_back.values()[0..8], &[4.5; 8]);
    }

    #[test]
    fn restandardizing_standardized_data_is_idempotent() {
        let (x, y) = random_raw(&[2, 2], 12, 11);
        let ds = standardize(&x, &y).unwrap();
        let ds2 = standardize(ds.x(), ds.y()).unwrap();
        for (a, b) in ds2.x().values().iter().zip(ds.x().values()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in ds2.y().iter().zip(ds.y()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_tiny_or_nonfinite_inputs() {
        let x = DenseTensor::new(vec![1, 1], vec![1.0]).unwrap();
        assert!(matches!(
            standardize(&x, &[1.0]),
            Err(CoreError::InvalidArgument(_))
        ));
        let x = DenseTensor::new(vec![1, 2], vec![f64::NAN, 1.0]).unwrap();
        assert!(standardize(&x, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let (x, y) = random_raw(&[3, 4], 10, 21);
        let ds = standardize(&x, &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn raw_manifest_is_standardized_on_load() {
        let (x, y) = random_raw(&[2, 2], 6, 33);
        let dir = tempfile::tempdir().unwrap();
        // Write a raw (standardized: false) dataset by hand.
        let entries = 4usize;
        let mut sample_major = vec![0.0; x.len()];
        for i in 0..entries {
            for s in 0..6 {
                sample_major[s * entries + i] = x.values()[i * 6 + s];
            }
        }
        write_f64s(&dir.path().join("x.f64"), &sample_major).unwrap();
        write_f64s(&dir.path().join("y.f64"), &y).unwrap();
        std::fs::write(
            dir.path().join("dataset.json"),
            r#"{"format":"surf-ds-v1","shape":[2,2],"m":6,"x_file":"x.f64","y_file":"y.f64","layout":"row-major","standardized":false}"#,
        )
        .unwrap();
        let loaded = load(dir.path()).unwrap();
        let direct = standardize(&x, &y).unwrap();
        assert_eq!(loaded, direct);
    }

    #[test]
    fn truncated_payload_is_a_distinct_error() {
        let (x, y) = random_raw(&[3, 4], 10, 5);
        let ds = standardize(&x, &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let xf = dir.path().join("x.f64");
        let bytes = std::fs::read(&xf).unwrap();
        std::fs::write(&xf, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(
            load(dir.path()),
            Err(CoreError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn shape_product_mismatch_is_a_distinct_error() {
        let (x, y) = random_raw(&[3, 4], 10, 6);
        let ds = standardize(&x, &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        // Manifest promises a smaller shape than the payload carries.
        let manifest = std::fs::read_to_string(dir.path().join("dataset.json")).unwrap();
        let patched = manifest.replace("[\n    3,\n    4\n  ]", "[\n    3,\n    2\n  ]");
        assert_ne!(patched, manifest, "manifest patch must apply");
        std::fs::write(dir.path().join("dataset.json"), patched).unwrap();
        assert!(matches!(
            load(dir.path()),
            Err(CoreError::PayloadShapeMismatch { .. })
        ));
    }

    #[test]
    fn standardized_manifest_without_record_is_rejected() {
        let (x, y) = random_raw(&[2, 2], 6, 51);
        let ds = standardize(&x, &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("dataset.json")).unwrap();
        let patched = manifest.replace("\"std_file\": \"std.f64\"", "\"layout2\": \"x\"");
        assert_ne!(patched, manifest);
        std::fs::write(dir.path().join("dataset.json"), patched).unwrap();
        assert!(matches!(load(dir.path()), Err(CoreError::Manifest(_))));
    }

    #[test]
    fn corrupt_manifest_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("dataset.json"), "{not json").unwrap();
        assert!(matches!(load(dir.path()), Err(CoreError::Manifest(_))));
    }

    #[test]
    fn subset_selects_samples() {
        let (x, y) = random_raw(&[2, 2], 6, 44);
        let ds = standardize(&x, &y).unwrap();
        let sub = ds.subset(&[1, 4]).unwrap();
        assert_eq!(sub.num_samples(), 2);
        for i in 0..4 {
            assert_eq!(sub.x().values()[i * 2], ds.x().values()[i * 6 + 1]);
            assert_eq!(sub.x().values()[i * 2 + 1], ds.x().values()[i * 6 + 4]);
        }
        assert_eq!(sub.y(), &[ds.y()[1], ds.y()[4]]);
    }
}
