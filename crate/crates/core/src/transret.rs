//! Transformation–retransformation (TR) versions of the spatial median and
//! the spatial HL estimator.
//!
//! The data are standardized with the symmetric `S^{-1/2}` of a shape matrix,
//! the plain estimator is computed there, and the result is mapped back with
//! `S^{1/2}`. Because the shape is affine equivariant up to scale and the
//! plain estimators are orthogonally equivariant, the result is affine
//! equivariant.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::Result;
use crate::location::{hl_estimator, spatial_median, LocationFit, SolverConfig};
use crate::matalg::SymMatrix;
use crate::scatter::{hr_estimator, rank_hr_estimator, ScatterConfig};

/// Where the standardizing shape matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrChoice {
    /// Tyler shape from the Hettmansperger–Randles fixed point.
    TylerAtHr,
    /// Shape from the signed-rank simultaneous estimator.
    RankHr,
    /// A caller-provided SPD matrix.
    UserSupplied(SymMatrix),
}

/// A TR fit together with the shape used to standardize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrFit {
    pub fit: LocationFit,
    pub shape: SymMatrix,
    pub shape_converged: bool,
}

fn shape_for(data: &DataMatrix, choice: &TrChoice, scfg: &ScatterConfig) -> Result<(SymMatrix, bool)> {
    match choice {
        TrChoice::TylerAtHr => {
            let f = hr_estimator(data, scfg)?;
            Ok((f.shape, f.converged))
        }
        TrChoice::RankHr => {
            let f = rank_hr_estimator(data, scfg)?;
            Ok((f.shape, f.converged))
        }
        TrChoice::UserSupplied(s) => {
            s.check_spd()?;
            Ok((s.clone(), true))
        }
    }
}

fn transform_retransform(
    data: &DataMatrix,
    choice: &TrChoice,
    cfg: &SolverConfig,
    scfg: &ScatterConfig,
    estimator: impl Fn(&DataMatrix, &SolverConfig) -> Result<LocationFit>,
) -> Result<TrFit> {
    let (shape, shape_converged) = shape_for(data, choice, scfg)?;
    let eig = shape.eigen()?;
    let inv_root = eig.recompose(|l| 1.0 / l.sqrt());
    let root = eig.recompose(|l| l.sqrt());

    let standardized = data.affine(inv_root.as_slice(), &vec![0.0; data.p()])?;
    let inner = estimator(&standardized, cfg)?;
    let estimate = root.mul_vec(&inner.estimate)?;
    let cov_of_estimate = match &inner.cov_of_estimate {
        Some(c) => Some(c.congruence(root.as_slice())?),
        None => None,
    };
    Ok(TrFit {
        fit: LocationFit {
            estimate,
            cov_of_estimate,
            iterations: inner.iterations,
            converged: inner.converged && shape_converged,
            objective: inner.objective,
            objective_trace: inner.objective_trace,
        },
        shape,
        shape_converged,
    })
}

/// Affine-equivariant spatial median.
pub fn tr_spatial_median(
    data: &DataMatrix,
    choice: &TrChoice,
    cfg: &SolverConfig,
    scfg: &ScatterConfig,
) -> Result<TrFit> {
    transform_retransform(data, choice, cfg, scfg, spatial_median)
}

/// Affine-equivariant spatial Hodges–Lehmann estimator.
pub fn tr_hl(
    data: &DataMatrix,
    choice: &TrChoice,
    cfg: &SolverConfig,
    scfg: &ScatterConfig,
) -> Result<TrFit> {
    transform_retransform(data, choice, cfg, scfg, hl_estimator)
}

/// Stretch `diag(3, 1)` used with [`equivariance_witness`], row-major.
pub const WITNESS_STRETCH: [f64; 4] = [3.0, 0.0, 0.0, 1.0];

/// A fixed five-point planar sample on which the plain HL estimator does not
/// commute with [`WITNESS_STRETCH`] but the TR version does.
pub fn equivariance_witness() -> DataMatrix {
    DataMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![4.0, 1.0],
        vec![1.0, 5.0],
    ])
    .expect("witness rows are valid")
}
