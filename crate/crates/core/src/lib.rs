//! Dimension-adaptive inference on quadratic functionals of least-squares
//! regression coefficients when `p/n` is bounded away from one.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod normal;
pub mod onesample;
pub mod simulation;
pub mod twosample;

pub use error::{Error, Result};
pub use estimators::{Flag, Floored, SnrEstimates, VarianceEstimates};
pub use linalg::{Dataset, Design, ModelFit};
pub use onesample::{InferenceResult, Method, Side};
pub use twosample::TwoSampleFit;

pub use nalgebra;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
