//! Boundary-adaptive local polynomial estimation of conditional CDFs, PDFs,
//! and their derivatives.
//!
//! The estimator works in two stages: a local polynomial regression of CDF
//! indicators on the covariates, followed by a local polynomial smoothing of
//! the fitted values in the response. Both stages reduce to explicit weight
//! vectors, which makes point estimation, variance estimation (through the
//! V-statistic structure of the double sum), data-driven bandwidth
//! selection, and robust bias-corrected confidence intervals and uniform
//! bands all available in closed form. Because the kernels are compactly
//! supported and the weights solve the local least-squares problem on
//! whatever window the data actually occupies, the same code path is valid
//! at interior, near-boundary, and boundary evaluation points.
//!
//! Modules follow the pipeline:
//!
//! - [`model`]: datasets, configuration, evaluation grids
//! - [`kernels`] / [`basis`]: kernel families and polynomial bases
//! - [`estimator`]: the two-stage weight vectors and grid fits
//! - [`covariance`]: variance-covariance across grid points
//! - [`bandwidth`]: plug-in MSE / IMSE bandwidth selection
//! - [`inference`]: confidence intervals, bias-corrected refits, uniform
//!   bands
//! - [`montecarlo`]: simulation harness with analytic ground truth

// negated comparisons like `!(h > 0.0)` are deliberate NaN guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod basis;
pub mod covariance;
pub mod dist;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod inference;
pub mod kernels;
pub mod model;
pub mod montecarlo;

pub use bandwidth::{BandwidthRule, BandwidthSelection, MomentEstimates};
pub use covariance::CovarianceEstimate;
pub use error::{Error, Result};
pub use estimator::{CdeFit, GridFit, WeightSet};
pub use inference::{fit, BandCritical};
pub use kernels::KernelFamily;
pub use model::{default_grid, load_dataset, DataSet, EstimationConfig, EvaluationSpec};
pub use montecarlo::{CoverageReport, DgpKind, DgpSpec, StudyConfig};
