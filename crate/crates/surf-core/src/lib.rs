//! Boosted sparse unit-rank tensor regression.
//!
//! The crate fits a scalar response against tensor-valued predictors with a
//! coefficient tensor built as a sum of sparse rank-1 (unit-rank) terms. Each
//! term is estimated on the current response residual, either by
//!
//! * [`surf`] — a stagewise solver that traces the entire l1 regularization
//!   path of the penalized unit-rank problem in a single run of small
//!   forward/backward coordinate steps, or
//! * [`acs`] — an alternating convex search baseline that solves the same
//!   problem on a fixed grid of penalty values via block coordinate descent.
//!
//! [`deflate`] stacks unit-rank terms sequentially (fit, deflate, repeat) with
//! k-fold cross-validation for the penalty and the rank, [`simulate`]
//! generates correlated Gaussian benchmark data with planted sparse low-rank
//! coefficients, and [`dataset`] handles standardization and on-disk formats.

pub mod acs;
pub mod dataset;
pub mod deflate;
pub mod error;
pub mod path;
pub mod simulate;
pub mod surf;
pub mod tensor;

pub use error::CoreError;
pub use tensor::{DenseTensor, UnitRankTerm};
