//! Dissimilarity index (DI) and area of applicability (AOA) for spatial
//! prediction models.
//!
//! The crate bundles everything needed to go from training samples and a
//! stack of predictor grids to an AOA mask:
//!
//! * [`predictor_space`] standardizes and importance-weights predictors and
//!   computes the DI of arbitrary points.
//! * [`aoa`] derives fold-aware training DI, quantile thresholds and masks,
//!   and the threshold-calibration sweep.
//! * [`forest`] is a random forest regressor with out-of-bag permutation
//!   importance, which supplies the predictor weights.
//! * [`validation`] holds fold assignment, cross-validation and metrics.
//! * [`simulation`] generates truth-known prediction tasks and runs
//!   scenario catalogues.
//! * [`io`] reads and writes grids, sample tables, models and reports.

pub mod aoa;
pub mod error;
pub mod forest;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod predictor_space;
pub mod rng;
pub mod samples;
pub mod simulation;
pub mod stats;
pub mod validation;

pub use error::{AoaError, Result};
pub use grid::{Grid, GridGeometry, PredictorStack};
pub use matrix::Matrix;
pub use samples::{PredictorMatrix, SampleTable};
