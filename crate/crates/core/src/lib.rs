//! Spatial sign and signed-rank methods for multivariate location.
//!
//! The crate covers the spatial median and the spatial Hodges–Lehmann
//! estimator, their affine-equivariant transformation–retransformation
//! versions, sandwich covariance estimates, sign and signed-rank tests with
//! chi-square calibration, and a high-dimensional diagnostic comparing the HL
//! estimator with its leading-order representation.

pub mod data;
pub mod error;
pub mod highdim;
pub mod inference;
pub mod location;
pub mod matalg;
pub mod scatter;
pub mod signs;
pub mod sim;
pub mod transret;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use location::{hl_estimator, spatial_median, BhatMode, LocationFit, SolverConfig};
pub use matalg::SymMatrix;
