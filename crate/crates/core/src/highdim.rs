//! High-dimensional representation error of the spatial HL estimator.
//!
//! With `â = C(n,2)⁻¹ Σ r_ij⁻¹` (r_ij = ‖z_ij‖) and `q_n` the average
//! Walsh-average direction,
//!
//! ```text
//! Δ = √n · â · μ̂_HL − √n · q_n
//! ```
//!
//! measures how well the linear representation `â μ̂_HL ≈ q_n` holds; its norm
//! shrinks as `n` and `p = γn` grow together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::location::{hl_point, SolverConfig};
use crate::matalg::SymMatrix;
use crate::signs::{add_outer, add_scaled, norm, walsh_averages};
use crate::sim::{cell_seed, sample, Family, SimSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaStatistic {
    pub delta: Vec<f64>,
    pub a_hat: f64,
    pub hl_estimate: Vec<f64>,
    pub converged: bool,
}

impl DeltaStatistic {
    pub fn norm(&self) -> f64 {
        norm(&self.delta)
    }

    /// `‖√n · â · μ̂_HL‖`, which should stay bounded along the grid.
    pub fn scaled_hl_norm(&self, n: usize) -> f64 {
        (n as f64).sqrt() * self.a_hat * norm(&self.hl_estimate)
    }
}

struct PairSums {
    inv_r: f64,
    signs: Vec<f64>,
    zero_pair: Option<(usize, usize)>,
}

/// Computes Δ for one sample: a single pass over the Walsh averages for `â`
/// and `q_n`, then the HL point estimate.
pub fn delta_statistic(data: &DataMatrix, cfg: &SolverConfig) -> Result<DeltaStatistic> {
    let stream = walsh_averages(data)?;
    let p = data.p();
    let blocks = stream.fold_rows(
        || PairSums {
            inv_r: 0.0,
            signs: vec![0.0; p],
            zero_pair: None,
        },
        |acc, i, j, z| {
            let r = norm(z);
            if r == 0.0 {
                acc.zero_pair.get_or_insert((i, j));
            } else {
                acc.inv_r += 1.0 / r;
                add_scaled(&mut acc.signs, z, 1.0 / r);
            }
        },
    );
    let mut inv_r = 0.0;
    let mut q = vec![0.0; p];
    for b in &blocks {
        if let Some((i, j)) = b.zero_pair {
            return Err(Error::DegenerateWalshAverage { i, j });
        }
        inv_r += b.inv_r;
        add_scaled(&mut q, &b.signs, 1.0);
    }
    let m = stream.count() as f64;
    let a_hat = inv_r / m;

    let fit = hl_point(data, cfg)?;
    let root_n = (data.n() as f64).sqrt();
    let delta = fit
        .estimate
        .iter()
        .zip(&q)
        .map(|(mu, s)| root_n * a_hat * mu - root_n * s / m)
        .collect();
    Ok(DeltaStatistic {
        delta,
        a_hat,
        hl_estimate: fit.estimate,
        converged: fit.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles (type 7); NaN fields when `values` is
    /// empty.
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |prob: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let h = prob * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Quantiles {
            q25: at(0.25),
            median: at(0.5),
            q75: at(0.75),
        }
    }
}

/// Outcome of one replication; failed replications keep their error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReplicate {
    pub rep: usize,
    pub delta_norm: Option<f64>,
    pub a_hat: Option<f64>,
    pub scaled_hl_norm: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Summary of one `(n, p, family)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub n: usize,
    pub p: usize,
    pub family: Family,
    /// The study seed; replications draw from a seed derived from it and the cell.
    pub seed: u64,
    /// `‖Δ‖` of the successful replications, in replication order.
    pub per_rep_norms: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub quantiles: Quantiles,
    pub max_scaled_hl_norm: f64,
    pub failures: usize,
    pub replicates: Vec<DeltaReplicate>,
}

/// One grid point: sample size and aspect ratio `γ = p/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub gamma: f64,
}

impl GridCell {
    pub fn dim(&self) -> Result<usize> {
        let p = (self.gamma * self.n as f64).round();
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid cell n={} γ={} gives p={p}; need p ≥ 2",
                self.n, self.gamma
            )));
        }
        Ok(p as usize)
    }
}

/// Desk-scale study layout; `full_scale` bumps the replication count to 1000.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub grid: Vec<GridCell>,
    pub families: Vec<Family>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let grid = [0.5, 1.0]
            .iter()
            .flat_map(|&gamma| [100, 200, 500].map(|n| GridCell { n, gamma }))
            .collect();
        StudyConfig {
            grid,
            families: vec![Family::Normal, Family::T { df: 3 }],
            replications: 200,
            seed: 2024,
        }
    }
}

impl StudyConfig {
    pub fn full_scale() -> Self {
        StudyConfig {
            replications: 1000,
            ..Self::default()
        }
    }
}

fn replicate(spec: &SimSpec, rep: usize, cfg: &SolverConfig) -> DeltaReplicate {
    match sample(spec, rep).and_then(|d| delta_statistic(&d, cfg)) {
        Ok(s) => DeltaReplicate {
            rep,
            delta_norm: Some(s.norm()),
            a_hat: Some(s.a_hat),
            scaled_hl_norm: Some(s.scaled_hl_norm(spec.n)),
            converged: s.converged,
            error: None,
        },
        Err(e) => DeltaReplicate {
            rep,
            delta_norm: None,
            a_hat: None,
            scaled_hl_norm: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs one cell. Replications are independent streams, so the result does
/// not depend on the number of worker threads.
pub fn delta_cell(
    cell: GridCell,
    family: Family,
    seed: u64,
    replications: usize,
    cfg: &SolverConfig,
) -> Result<DeltaReport> {
    delta_replications(cell.n, cell.dim()?, family, seed, replications, cfg)
}

/// Same as [`delta_cell`] for an explicit dimension `p`.
pub fn delta_replications(
    n: usize,
    p: usize,
    family: Family,
    seed: u64,
    replications: usize,
    cfg: &SolverConfig,
) -> Result<DeltaReport> {
    cfg.validate()?;
    if p < 2 {
        return Err(Error::InvalidInput(format!("need p ≥ 2, got {p}")));
    }
    let spec = SimSpec {
        n,
        p,
        family,
        seed: cell_seed(seed, n, p, family),
        replications,
    };
    spec.validate()?;
    let replicates: Vec<DeltaReplicate> = (0..replications)
        .into_par_iter()
        .map(|rep| replicate(&spec, rep, cfg))
        .collect();
    let per_rep_norms: Vec<f64> = replicates.iter().filter_map(|r| r.delta_norm).collect();
    Ok(DeltaReport {
        n,
        p,
        family,
        seed,
        quantiles: Quantiles::of(&per_rep_norms),
        a_hat: replicates.iter().filter_map(|r| r.a_hat).collect(),
        max_scaled_hl_norm: replicates
            .iter()
            .filter_map(|r| r.scaled_hl_norm)
            .fold(0.0, f64::max),
        failures: replicates.iter().filter(|r| r.error.is_some()).count(),
        per_rep_norms,
        replicates,
    })
}

/// The Δ study over a grid: one report per `(cell, family)`, cells in grid order
/// and families in the given order within each cell.
pub fn figure3_study(
    grid: &[GridCell],
    families: &[Family],
    seed: u64,
    replications: usize,
    cfg: &SolverConfig,
) -> Result<Vec<DeltaReport>> {
    // check the whole grid before spending time on any cell
    for c in grid {
        c.dim()?;
    }
    let mut out = Vec::with_capacity(grid.len() * families.len());
    for &cell in grid {
        for &family in families {
            out.push(delta_cell(cell, family, seed, replications, cfg)?);
        }
    }
    Ok(out)
}

/// One row per replication:
/// `n,p,family,rep,delta_norm,a_hat,converged`. Failed replications leave the
/// numeric fields empty.
pub fn reports_to_csv(reports: &[DeltaReport]) -> String {
    let mut s = String::from("n,p,family,rep,delta_norm,a_hat,converged\n");
    let num = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in reports {
        for rep in &r.replicates {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.p,
                r.family.label(),
                rep.rep,
                num(rep.delta_norm),
                num(rep.a_hat),
                rep.converged
            ));
        }
    }
    s
}

/// Sample checks of the moment and eigenvalue conditions behind the
/// high-dimensional representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    /// `c_k = mean r_ij^{-k}` for `k = 1..4`.
    pub inverse_moments: [f64; 4],
    /// `c_k / c_1^k`; these stay O(1) when the radii concentrate.
    pub moment_ratios: [f64; 4],
    /// Largest eigenvalue of the sample covariance of the Walsh directions.
    pub lambda_max: f64,
    /// Pairs skipped because their Walsh average is exactly 0.
    pub zero_pairs: usize,
    pub flags: Vec<String>,
}

pub const LAMBDA_MAX_FLAG: f64 = 0.9;
pub const MOMENT_RATIO_FLAG: f64 = 100.0;

struct MomentSums {
    inv: [f64; 4],
    signs: Vec<f64>,
    outer: Vec<f64>,
    zeros: usize,
}

/// Advisory only: violations are reported as flags, not errors.
pub fn assumption_diagnostics(data: &DataMatrix) -> Result<MomentDiagnostics> {
    if data.n() < 3 {
        return Err(Error::InvalidInput("diagnostics need n ≥ 3".into()));
    }
    let p = data.p();
    let stream = walsh_averages(data)?;
    let blocks = stream.fold_rows(
        || MomentSums {
            inv: [0.0; 4],
            signs: vec![0.0; p],
            outer: vec![0.0; p * p],
            zeros: 0,
        },
        |acc, _, _, z| {
            let r = norm(z);
            if r == 0.0 {
                acc.zeros += 1;
                return;
            }
            let mut w = 1.0;
            for c in acc.inv.iter_mut() {
                w /= r;
                *c += w;
            }
            let u: Vec<f64> = z.iter().map(|v| v / r).collect();
            add_scaled(&mut acc.signs, &u, 1.0);
            add_outer(&mut acc.outer, &u, &u, 1.0);
        },
    );
    let mut inv = [0.0; 4];
    let mut signs = vec![0.0; p];
    let mut outer = vec![0.0; p * p];
    let mut zeros = 0;
    for b in &blocks {
        for k in 0..4 {
            inv[k] += b.inv[k];
        }
        add_scaled(&mut signs, &b.signs, 1.0);
        add_scaled(&mut outer, &b.outer, 1.0);
        zeros += b.zeros;
    }
    let m = (stream.count() - zeros) as f64;
    let mut flags = Vec::new();
    if m == 0.0 {
        flags.push("every Walsh average is zero".to_string());
        return Ok(MomentDiagnostics {
            inverse_moments: [f64::NAN; 4],
            moment_ratios: [f64::NAN; 4],
            lambda_max: f64::NAN,
            zero_pairs: zeros,
            flags,
        });
    }
    let inverse_moments = inv.map(|c| c / m);
    let mut moment_ratios = [0.0; 4];
    for k in 0..4 {
        moment_ratios[k] = inverse_moments[k] / inverse_moments[0].powi(k as i32 + 1);
    }
    signs.iter_mut().for_each(|v| *v /= m);
    outer.iter_mut().for_each(|v| *v /= m);
    add_outer(&mut outer, &signs, &signs, -1.0);
    let lambda_max = SymMatrix::symmetrized(p, &outer).eigenvalues()?[0];

    if lambda_max >= LAMBDA_MAX_FLAG {
        flags.push(format!(
            "leading eigenvalue of the direction covariance is {lambda_max:.3} (≥ {LAMBDA_MAX_FLAG})"
        ));
    }
    if let Some(k) = moment_ratios.iter().position(|r| !(*r <= MOMENT_RATIO_FLAG)) {
        flags.push(format!(
            "inverse-moment ratio c_{}/c_1^{} = {:.3e} exceeds {MOMENT_RATIO_FLAG}",
            k + 1,
            k + 1,
            moment_ratios[k]
        ));
    }
    if zeros > 0 {
        flags.push(format!("{zeros} Walsh averages are exactly zero"));
    }
    Ok(MomentDiagnostics {
        inverse_moments,
        moment_ratios,
        lambda_max,
        zero_pairs: zeros,
        flags,
    })
}
