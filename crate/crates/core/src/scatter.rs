//! Tyler's shape matrix and the simultaneous location–shape estimators built
//! from spatial signs (Hettmansperger–Randles) and from the estimated
//! signed-rank function.
//!
//! All three iterate in standardized coordinates `eᵢ = S^{-1/2}(yᵢ − μ)`:
//! a Weiszfeld step moves `μ`, and the shape is updated as
//! `S ← S^{1/2} C S^{1/2}` where `C` is the (trace-normalized) mean outer
//! product of the scores, then rescaled to trace `p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matalg::SymMatrix;
use crate::signs::{add_outer, add_scaled, norm};

const ROW_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

impl ScatterConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter < 1 {
            return Err(Error::InvalidInput(format!(
                "invalid scatter config: tol {}, max_iter {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// A location vector paired with a shape matrix normalized to `trace = p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterFit {
    pub location: Vec<f64>,
    pub shape: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Rows that coincided with the location at the last iteration and so
    /// carried no sign.
    pub dropped_rows: usize,
    /// Norm of the mean score at the returned location.
    pub location_residual: f64,
    /// `‖C − I‖_F` for the scatter equation at the returned shape.
    pub scatter_residual: f64,
}

fn require_n_above_p(data: &DataMatrix) -> Result<()> {
    if data.n() <= data.p() {
        return Err(Error::Underdetermined {
            n: data.n(),
            p: data.p(),
        });
    }
    Ok(())
}

fn trace_normalized(m: &SymMatrix) -> SymMatrix {
    m.scaled(m.dim() as f64 / m.trace())
}

/// Standardized residuals `S^{-1/2}(yᵢ − μ)` as an `n × p` row-major buffer.
fn standardize(data: &DataMatrix, mu: &[f64], inv_root: &SymMatrix) -> Vec<f64> {
    let p = data.p();
    let r = inv_root.as_slice();
    let mut out = vec![0.0; data.n() * p];
    let mut diff = vec![0.0; p];
    for (row, dst) in data.rows().zip(out.chunks_exact_mut(p)) {
        for ((d, a), m) in diff.iter_mut().zip(row).zip(mu) {
            *d = a - m;
        }
        for (i, v) in dst.iter_mut().enumerate() {
            *v = r[i * p..(i + 1) * p].iter().zip(&diff).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Spatial-sign scores of the standardized residuals: `(Σ u(eᵢ), Σ 1/‖eᵢ‖,
/// p·n_eff⁻¹ Σ u uᵀ, dropped)`.
fn sign_scores(e: &[f64], p: usize) -> (Vec<f64>, f64, SymMatrix, usize) {
    let mut sum = vec![0.0; p];
    let mut inv = 0.0;
    let mut outer = vec![0.0; p * p];
    let mut dropped = 0;
    for ei in e.chunks_exact(p) {
        let r = norm(ei);
        if r == 0.0 {
            dropped += 1;
            continue;
        }
        inv += 1.0 / r;
        add_scaled(&mut sum, ei, 1.0 / r);
        add_outer(&mut outer, ei, ei, 1.0 / (r * r));
    }
    let used = (e.len() / p - dropped).max(1) as f64;
    let c = SymMatrix::symmetrized(p, &outer).scaled(p as f64 / used);
    (sum, inv, c, dropped)
}

/// Tyler's shape matrix about a fixed center, trace-normalized to `p`.
///
/// Rows equal to `center` are dropped; the remaining count must exceed `p`.
pub fn tyler_shape(data: &DataMatrix, center: &[f64], cfg: &ScatterConfig) -> Result<ScatterFit> {
    cfg.validate()?;
    let p = data.p();
    let centered = data.centered(center)?;
    let kept: Vec<Vec<f64>> = centered
        .rows()
        .filter(|r| r.iter().any(|v| *v != 0.0))
        .map(<[f64]>::to_vec)
        .collect();
    let dropped = data.n() - kept.len();
    if kept.len() <= p {
        return Err(Error::Underdetermined { n: kept.len(), p });
    }
    let kept = DataMatrix::from_rows(&kept)?;
    let zero = vec![0.0; p];

    let mut shape = SymMatrix::identity(p);
    let mut iterations = 0;
    loop {
        let eig = shape.eigen()?;
        let inv_root = eig.recompose(|l| 1.0 / l.sqrt());
        let e = standardize(&kept, &zero, &inv_root);
        let (_, _, c, _) = sign_scores(&e, p);
        let residual = c.sub(&SymMatrix::identity(p))?.frobenius_norm();
        if residual <= cfg.tol || iterations >= cfg.max_iter {
            return Ok(ScatterFit {
                location: center.to_vec(),
                shape,
                iterations,
                converged: residual <= cfg.tol,
                dropped_rows: dropped,
                location_residual: 0.0,
                scatter_residual: residual,
            });
        }
        let root = eig.recompose(|l| l.sqrt());
        shape = trace_normalized(&c.congruence(root.as_slice())?);
        iterations += 1;
    }
}

fn coordinate_median(data: &DataMatrix) -> Vec<f64> {
    (0..data.p())
        .map(|c| {
            let mut v: Vec<f64> = data.rows().map(|r| r[c]).collect();
            v.sort_by(f64::total_cmp);
            let m = v.len();
            if m % 2 == 1 {
                v[m / 2]
            } else {
                0.5 * (v[m / 2 - 1] + v[m / 2])
            }
        })
        .collect()
}

/// Scores one simultaneous-estimator iteration produces.
struct Scores {
    /// Sum of the location scores.
    sum: Vec<f64>,
    /// Weiszfeld denominator matching `sum`.
    inv: f64,
    /// Trace-normalized scatter matrix `C`; the fixed point is `C = I`.
    c: SymMatrix,
    /// Number of scores the mean location score averages over.
    count: f64,
    dropped: usize,
}

fn hr_scores(e: &[f64], p: usize) -> Scores {
    let (sum, inv, c, dropped) = sign_scores(e, p);
    let count = (e.len() / p) as f64;
    Scores {
        sum,
        inv,
        c,
        count,
        dropped,
    }
}

/// Signed-rank scores `q̂(eᵢ) = n⁻¹ Σ_k u((e_k + eᵢ)/2)` over all ordered
/// pairs including `k = i`.
fn rank_scores(e: &[f64], p: usize) -> Scores {
    let n = e.len() / p;
    let rows: Vec<&[f64]> = e.chunks_exact(p).collect();
    let per_chunk: Vec<(Vec<Vec<f64>>, f64, usize)> = (0..n.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut qs = Vec::with_capacity(ROW_CHUNK);
            let mut inv = 0.0;
            let mut dropped = 0;
            let mut buf = vec![0.0; p];
            for i in (chunk * ROW_CHUNK)..((chunk + 1) * ROW_CHUNK).min(n) {
                let mut q = vec![0.0; p];
                for ek in &rows {
                    for ((b, a), c) in buf.iter_mut().zip(rows[i]).zip(*ek) {
                        *b = 0.5 * (a + c);
                    }
                    let r = norm(&buf);
                    if r > 0.0 {
                        inv += 1.0 / r;
                        add_scaled(&mut q, &buf, 1.0 / r);
                    }
                }
                if q.iter().all(|v| *v == 0.0) {
                    dropped += 1;
                }
                q.iter_mut().for_each(|v| *v /= n as f64);
                qs.push(q);
            }
            (qs, inv, dropped)
        })
        .collect();

    let mut sum = vec![0.0; p];
    let mut inv = 0.0;
    let mut outer = vec![0.0; p * p];
    let mut dropped = 0;
    for (qs, chunk_inv, chunk_dropped) in &per_chunk {
        inv += chunk_inv;
        dropped += chunk_dropped;
        for q in qs {
            // q̂ carries the 1/n factor; the Weiszfeld pair sum does not
            add_scaled(&mut sum, q, n as f64);
            add_outer(&mut outer, q, q, 1.0);
        }
    }
    let m = SymMatrix::symmetrized(p, &outer);
    let tr = m.trace();
    let c = if tr > 0.0 {
        m.scaled(p as f64 / tr)
    } else {
        SymMatrix::identity(p)
    };
    Scores {
        sum,
        inv,
        c,
        count: (n * n) as f64,
        dropped,
    }
}

fn simultaneous(
    data: &DataMatrix,
    cfg: &ScatterConfig,
    scores: impl Fn(&[f64], usize) -> Scores,
) -> Result<ScatterFit> {
    cfg.validate()?;
    require_n_above_p(data)?;
    let p = data.p();
    let mut mu = coordinate_median(data);
    let mut shape = SymMatrix::identity(p);
    let mut iterations = 0;

    loop {
        let eig = shape.eigen()?;
        let inv_root = eig.recompose(|l| 1.0 / l.sqrt());
        let root = eig.recompose(|l| l.sqrt());
        let e = standardize(data, &mu, &inv_root);
        let s = scores(&e, p);
        let loc_res = norm(&s.sum) / s.count;
        let scat_res = s.c.sub(&SymMatrix::identity(p))?.frobenius_norm();
        let converged = loc_res <= cfg.tol && scat_res <= cfg.tol;
        if converged || iterations >= cfg.max_iter {
            return Ok(ScatterFit {
                location: mu,
                shape,
                iterations,
                converged,
                dropped_rows: s.dropped,
                location_residual: loc_res,
                scatter_residual: scat_res,
            });
        }
        if s.inv > 0.0 {
            let step: Vec<f64> = s.sum.iter().map(|v| v / s.inv).collect();
            let step = root.mul_vec(&step)?;
            for (m, d) in mu.iter_mut().zip(&step) {
                *m += d;
            }
        }
        shape = trace_normalized(&s.c.congruence(root.as_slice())?);
        iterations += 1;
    }
}

/// Hettmansperger–Randles estimator: `μ` and `S` with
/// `n⁻¹ Σ u(eᵢ) = 0` and `p·n⁻¹ Σ u(eᵢ)u(eᵢ)ᵀ = I`.
pub fn hr_estimator(data: &DataMatrix, cfg: &ScatterConfig) -> Result<ScatterFit> {
    simultaneous(data, cfg, hr_scores)
}

/// Signed-rank analogue of [`hr_estimator`]: `n⁻¹ Σ q̂(eᵢ) = 0` and
/// `n⁻¹ Σ q̂(eᵢ)q̂(eᵢ)ᵀ ∝ I`, the constant fixed by matching traces.
pub fn rank_hr_estimator(data: &DataMatrix, cfg: &ScatterConfig) -> Result<ScatterFit> {
    simultaneous(data, cfg, rank_scores)
}
