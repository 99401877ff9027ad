//! SAR tomographic inversion by sparse Bayesian learning.
//!
//! The crate is organized around the processing chain of a multi-baseline
//! stack:
//!
//! - [`model`]: acquisition geometry, elevation grid, steering matrix and the
//!   forward model `g = R·γ`.
//! - [`sbl`]: evidence maximization with MacKay fixed-point updates around a
//!   Tikhonov MAP step, pruning, and scatterer extraction.
//! - [`baselines`]: PCA and kernel-PCA steering-vector estimators.
//! - [`sim`]: scene and measurement generation, including the experiment
//!   presets.
//! - [`metrics`]: angular bias, elevation CRLB, detection classification and
//!   aggregation.
//! - [`experiment`]: configuration, experiment runners and result files used
//!   by the `sbltomo` binary.

// Validation is written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod sbl;
pub mod sim;

pub use nalgebra::{DMatrix, DVector};

pub type C64 = nalgebra::Complex<f64>;

pub use error::{Error, Result};
pub use model::{
    forward, AcquisitionGeometry, ElevationGrid, Reflectivity, Snapshot, SteeringMatrix,
};
pub use sbl::{sbl_solve, DetectedScatterer, SblOptions, SblResult, SblState};
