//! Solution-path records and their CSV / JSON-lines export schemas.
//!
//! Both solvers emit the same row shape. CSV columns, in fixed order:
//!
//! ```text
//! t,lambda,step_type,sigma,nnz_1,...,nnz_N,j,gamma
//! ```
//!
//! JSON-lines rows additionally carry the full sparse factor dump:
//! `{"t":..,"lambda":..,"step_type":..,"sigma":..,"j":..,"gamma":..,
//!   "factors":[{"len":..,"indices":[..],"values":[..]},..]}`.
//!
//! Floating-point values in CSV are printed with 17 significant digits so
//! they round-trip losslessly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::UnitRankTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepType {
    Init,
    Forward,
    Backward,
    Terminal,
    /// Grid solutions from the alternating convex search baseline.
    Acs,
}

impl StepType {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepType::Init => "init",
            StepType::Forward => "forward",
            StepType::Backward => "backward",
            StepType::Terminal => "terminal",
            StepType::Acs => "acs",
        }
    }
}

/// Sparse snapshot of one l1-normalized factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFactor {
    pub len: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseFactor {
    pub fn from_dense(v: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                indices.push(i);
                values.push(x);
            }
        }
        Self {
            len: v.len(),
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// One point along a solution path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: usize,
    pub lambda: f64,
    pub step_type: StepType,
    pub sigma: f64,
    pub factors: Vec<SparseFactor>,
    /// Penalized objective at this point's lambda.
    pub gamma: f64,
    /// Unpenalized loss (fit plus ridge term).
    pub j: f64,
}

impl PathPoint {
    pub fn to_term(&self) -> UnitRankTerm {
        UnitRankTerm {
            sigma: self.sigma,
            factors: self.factors.iter().map(SparseFactor::to_dense).collect(),
        }
    }
}

/// A full trace: every emitted point plus termination bookkeeping.
#[derive(Debug, Clone)]
pub struct TracedPath {
    pub points: Vec<PathPoint>,
    /// True when the step cap fired before natural termination.
    pub truncated: bool,
    pub forward_steps: usize,
    pub backward_steps: usize,
}

impl TracedPath {
    /// Fitted term at penalty `lambda`: the last point whose recorded lambda
    /// is `>= lambda` (the fully refined state at that penalty level), or the
    /// zero term when the path never reached that level.
    pub fn solution_at(&self, lambda: f64, entry_shape: &[usize]) -> UnitRankTerm {
        let mut out = UnitRankTerm::zero(entry_shape);
        for p in &self.points {
            if p.lambda >= lambda {
                out = p.to_term();
            } else {
                break;
            }
        }
        out
    }

    /// Distinct positive lambda values in path order (nonincreasing).
    pub fn distinct_lambdas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            if p.lambda > 0.0 && out.last().is_none_or(|&l| p.lambda < l) {
                out.push(p.lambda);
            }
        }
        out
    }
}

/// 17-significant-digit scientific notation; round-trips any finite f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_path_csv<W: Write>(points: &[PathPoint], n_modes: usize, mut w: W) -> Result<()> {
    let mut header = String::from("t,lambda,step_type,sigma");
    for n in 1..=n_modes {
        header.push_str(&format!(",nnz_{n}"));
    }
    header.push_str(",j,gamma");
    writeln!(w, "{header}")?;
    for p in points {
        let mut row = format!(
            "{},{},{},{}",
            p.t,
            fmt_f64(p.lambda),
            p.step_type.as_str(),
            fmt_f64(p.sigma)
        );
        for f in &p.factors {
            row.push_str(&format!(",{}", f.nnz()));
        }
        row.push_str(&format!(",{},{}", fmt_f64(p.j), fmt_f64(p.gamma)));
        writeln!(w, "{row}")?;
    }
    Ok(())
}

pub fn write_path_jsonl<W: Write>(points: &[PathPoint], mut w: W) -> Result<()> {
    for p in points {
        let line = serde_json::to_string(p)
            .map_err(|e| crate::error::CoreError::Manifest(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(t: usize, lambda: f64, sigma: f64, ty: StepType) -> PathPoint {
        PathPoint {
            t,
            lambda,
            step_type: ty,
            sigma,
            factors: vec![SparseFactor::from_dense(&[sigma.signum(), 0.0])],
            gamma: 1.0,
            j: 0.5,
        }
    }

    #[test]
    fn solution_at_picks_last_refined_state() {
        let path = TracedPath {
            points: vec![
                point(0, 2.0, 0.1, StepType::Init),
                point(1, 2.0, 0.2, StepType::Forward),
                point(2, 1.0, 0.3, StepType::Forward),
                point(3, 1.0, 0.25, StepType::Backward),
            ],
            truncated: false,
            forward_steps: 2,
            backward_steps: 1,
        };
        assert_eq!(path.solution_at(2.0, &[2]).sigma, 0.2);
        assert_eq!(path.solution_at(1.5, &[2]).sigma, 0.2);
        assert_eq!(path.solution_at(1.0, &[2]).sigma, 0.25);
        // Above the first lambda: zero model.
        assert!(path.solution_at(3.0, &[2]).is_zero());
        assert_eq!(path.distinct_lambdas(), vec![2.0, 1.0]);
    }

    #[test]
    fn csv_schema_is_stable() {
        let pts = vec![point(0, 1.0, 0.1, StepType::Init)];
        let mut buf = Vec::new();
        write_path_csv(&pts, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,lambda,step_type,sigma,nnz_1,j,gamma"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,1.0000000000000000e0,init,"), "{row}");
    }

    #[test]
    fn jsonl_round_trips() {
        let pts = vec![point(3, 0.5, 0.7, StepType::Backward)];
        let mut buf = Vec::new();
        write_path_jsonl(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: PathPoint = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, pts[0]);
    }

    #[test]
    fn fmt_f64_round_trips() {
        for &v in &[0.1, -3.75e-9, 12345.678901234567, 2.0 / 3.0] {
            let parsed: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }
}
