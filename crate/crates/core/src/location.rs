//! Spatial median and spatial Hodges–Lehmann estimators.
//!
//! Both are minimizers of an average Euclidean distance: to the observations
//! for the spatial median, to the Walsh averages for the HL estimator. They
//! share one Weiszfeld solver with the Vardi–Zhang modification, which stays
//! well defined when an iterate lands exactly on one of the points. The HL
//! variant never stores the `n(n−1)/2` averages; every sweep regenerates them.
//!
//! The covariance of each estimate is the plug-in sandwich `Â⁻¹B̂Â⁻¹`,
//! divided by `n` for the median and multiplied by `4/n` for HL.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matalg::SymMatrix;
use crate::signs::{add_hessian, add_outer, add_scaled, norm, walsh_averages, WalshStream};

/// Rows handled per parallel task in the per-observation sweeps.
const ROW_CHUNK: usize = 16;

/// How `B̂` is estimated for the HL sandwich and the signed-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BhatMode {
    /// Exact triples for `n ≤ 200`, rank-based otherwise.
    Auto,
    /// `C(n,3)⁻¹ Σ_{i<j<k} u(z_ij) u(z_jk)ᵀ`, symmetrized.
    ExactTriples,
    /// `n⁻¹ Σᵢ q̂(eᵢ) q̂(eᵢ)ᵀ`.
    RankBased,
    /// Exact-triple kernel averaged over `triples` distinct random triples.
    Subsampled { triples: usize, seed: u64 },
}

/// Sample size up to which [`BhatMode::Auto`] uses exact triples.
pub const AUTO_EXACT_MAX_N: usize = 200;

/// Default number of triples for [`BhatMode::Subsampled`].
pub const DEFAULT_SUBSAMPLE_TRIPLES: usize = 2_000_000;

impl Default for BhatMode {
    fn default() -> Self {
        Self::Auto
    }
}

impl BhatMode {
    fn resolve(self, n: usize) -> Self {
        match self {
            Self::Auto if n <= AUTO_EXACT_MAX_N && n >= 3 => Self::ExactTriples,
            Self::Auto => Self::RankBased,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once a step is shorter than `tol` times the mean distance from
    /// the starting point to the data.
    pub tol: f64,
    pub max_iter: usize,
    /// Points within `eta` (relative to the largest coordinate magnitude) of
    /// the iterate count as coincident with it.
    pub eta: f64,
    pub bhat_mode: BhatMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            eta: 8.0 * f64::EPSILON,
            bhat_mode: BhatMode::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter < 1 || !(self.eta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid solver config: tol {}, max_iter {}, eta {}",
                self.tol, self.max_iter, self.eta
            )));
        }
        if let BhatMode::Subsampled { triples: 0, .. } = self.bhat_mode {
            return Err(Error::InvalidInput("subsample needs at least one triple".into()));
        }
        Ok(())
    }
}

/// A location estimate with its estimated covariance and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationFit {
    pub estimate: Vec<f64>,
    /// Covariance of the estimate itself (already divided by `n`). `None`
    /// when `Â` is singular, e.g. for an HL fit from two observations.
    pub cov_of_estimate: Option<SymMatrix>,
    pub iterations: usize,
    pub converged: bool,
    /// Criterion value at the estimate.
    pub objective: f64,
    /// Criterion value at every iterate, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Sweep {
    /// `Σ u(x − μ)` over non-coincident points.
    sign_sum: Vec<f64>,
    /// `Σ 1/‖x − μ‖` over non-coincident points.
    inv_dist: f64,
    dist_sum: f64,
    coincident: usize,
    /// Distance to, and index of, the closest point seen.
    nearest: f64,
    nearest_at: (usize, usize),
}

impl Sweep {
    fn new(p: usize) -> Self {
        Self {
            sign_sum: vec![0.0; p],
            inv_dist: 0.0,
            dist_sum: 0.0,
            coincident: 0,
            nearest: f64::INFINITY,
            nearest_at: (0, 0),
        }
    }

    #[inline]
    fn visit(&mut self, diff: &[f64], eta: f64, at: (usize, usize)) {
        let d = norm(diff);
        self.dist_sum += d;
        if d < self.nearest {
            self.nearest = d;
            self.nearest_at = at;
        }
        if d <= eta {
            self.coincident += 1;
        } else {
            let w = 1.0 / d;
            self.inv_dist += w;
            add_scaled(&mut self.sign_sum, diff, w);
        }
    }

    fn merge(&mut self, other: &Sweep) {
        add_scaled(&mut self.sign_sum, &other.sign_sum, 1.0);
        self.inv_dist += other.inv_dist;
        self.dist_sum += other.dist_sum;
        self.coincident += other.coincident;
        if other.nearest < self.nearest {
            self.nearest = other.nearest;
            self.nearest_at = other.nearest_at;
        }
    }
}

/// The point cloud a Weiszfeld run minimizes the mean distance to.
trait Cloud {
    fn dim(&self) -> usize;
    fn count(&self) -> usize;
    fn sweep(&self, mu: &[f64], eta: f64) -> Sweep;
    fn norm_sum(&self) -> f64;
    fn coordinate_median(&self) -> Vec<f64>;
    fn all_equal(&self) -> bool;
    /// The point recorded as `Sweep::nearest_at`.
    fn point(&self, at: (usize, usize)) -> Vec<f64>;
}

struct Observations<'a>(&'a DataMatrix);

impl Cloud for Observations<'_> {
    fn dim(&self) -> usize {
        self.0.p()
    }

    fn count(&self) -> usize {
        self.0.n()
    }

    fn sweep(&self, mu: &[f64], eta: f64) -> Sweep {
        let mut s = Sweep::new(mu.len());
        let mut diff = vec![0.0; mu.len()];
        for (k, y) in self.0.rows().enumerate() {
            for ((d, a), m) in diff.iter_mut().zip(y).zip(mu) {
                *d = a - m;
            }
            s.visit(&diff, eta, (k, k));
        }
        s
    }

    fn point(&self, at: (usize, usize)) -> Vec<f64> {
        self.0.row(at.0).to_vec()
    }

    fn norm_sum(&self) -> f64 {
        self.0.rows().map(norm).sum()
    }

    fn coordinate_median(&self) -> Vec<f64> {
        (0..self.0.p())
            .map(|c| median_in_place(self.0.rows().map(|r| r[c]).collect()))
            .collect()
    }

    fn all_equal(&self) -> bool {
        let first = self.0.row(0);
        self.0.rows().all(|r| r == first)
    }
}

struct WalshCloud<'a>(WalshStream<'a>);

impl Cloud for WalshCloud<'_> {
    fn dim(&self) -> usize {
        self.0.data().p()
    }

    fn count(&self) -> usize {
        self.0.count()
    }

    fn sweep(&self, mu: &[f64], eta: f64) -> Sweep {
        let data = self.0.data();
        let centered = data
            .centered(mu)
            .expect("iterate has the data dimension");
        let stream = walsh_averages(&centered).expect("HL clouds have at least two rows");
        let blocks = stream.fold_rows(|| Sweep::new(mu.len()), |acc, i, j, z| acc.visit(z, eta, (i, j)));
        let mut total = Sweep::new(mu.len());
        for b in &blocks {
            total.merge(b);
        }
        total
    }

    fn norm_sum(&self) -> f64 {
        self.0
            .fold_rows(|| 0.0, |acc, _, _, z| *acc += norm(z))
            .iter()
            .sum()
    }

    fn coordinate_median(&self) -> Vec<f64> {
        let data = self.0.data();
        let n = data.n();
        (0..data.p())
            .map(|c| {
                let mut vals = Vec::with_capacity(self.0.count());
                for i in 0..n {
                    let a = data.row(i)[c];
                    for j in (i + 1)..n {
                        vals.push(0.5 * (a + data.row(j)[c]));
                    }
                }
                median_in_place(vals)
            })
            .collect()
    }

    fn all_equal(&self) -> bool {
        Observations(self.0.data()).all_equal()
    }

    fn point(&self, (i, j): (usize, usize)) -> Vec<f64> {
        let d = self.0.data();
        d.row(i).iter().zip(d.row(j)).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

fn median_in_place(mut vals: Vec<f64>) -> f64 {
    let m = vals.len();
    let mid = m / 2;
    let (_, upper, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if m % 2 == 1 {
        upper
    } else {
        let lower = vals[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

struct WeiszfeldRun {
    estimate: Vec<f64>,
    iterations: usize,
    converged: bool,
    objective: f64,
    trace: Vec<f64>,
}

/// Final iterates this close to a cloud point (relative to the spread) are
/// tested for optimality at that point.
const VERTEX_PROBE: f64 = 1e-3;

fn weiszfeld(cloud: &impl Cloud, cfg: &SolverConfig) -> WeiszfeldRun {
    let p = cloud.dim();
    let count = cloud.count() as f64;
    let norm_sum = cloud.norm_sum();
    let objective_of = |s: &Sweep| (s.dist_sum - norm_sum) / count;

    if cloud.all_equal() {
        let point = cloud.coordinate_median();
        let s = cloud.sweep(&point, 0.0);
        let obj = objective_of(&s);
        return WeiszfeldRun {
            estimate: point,
            iterations: 0,
            converged: true,
            objective: obj,
            trace: vec![obj],
        };
    }

    let mut mu = cloud.coordinate_median();
    let mut sweep = cloud.sweep(&mu, 0.0);
    let spread = sweep.dist_sum / count;
    let magnitude = mu.iter().map(|v| v.abs()).fold(spread, f64::max);
    let eta = cfg.eta * magnitude;
    sweep = cloud.sweep(&mu, eta);
    let step_tol = cfg.tol * spread;

    let mut trace = vec![objective_of(&sweep)];
    let mut converged = false;
    let mut iterations = 0;
    let mut step = vec![0.0; p];

    while iterations < cfg.max_iter {
        let r = norm(&sweep.sign_sum);
        let multiplicity = sweep.coincident as f64;
        // Vardi–Zhang optimality at a data point, or an exact stationary point.
        if r <= multiplicity || sweep.inv_dist == 0.0 {
            converged = true;
            break;
        }
        let shrink = if sweep.coincident > 0 {
            (1.0 - multiplicity / r).max(0.0)
        } else {
            1.0
        };
        let scale = shrink / sweep.inv_dist;
        for (s, g) in step.iter_mut().zip(&sweep.sign_sum) {
            *s = scale * g;
        }
        for (m, s) in mu.iter_mut().zip(&step) {
            *m += s;
        }
        iterations += 1;
        sweep = cloud.sweep(&mu, eta);
        trace.push(objective_of(&sweep));
        if norm(&step) <= step_tol {
            converged = true;
            break;
        }
    }

    // The minimizer can sit exactly on a cloud point, which Weiszfeld only
    // approaches linearly. If the closest point satisfies the optimality
    // condition there, it is the answer.
    if sweep.coincident == 0 && sweep.nearest <= VERTEX_PROBE * spread {
        let candidate = cloud.point(sweep.nearest_at);
        let at = cloud.sweep(&candidate, eta);
        if norm(&at.sign_sum) <= at.coincident as f64 {
            mu = candidate;
            trace.push(objective_of(&at));
            converged = true;
        }
    }

    WeiszfeldRun {
        estimate: mu,
        iterations,
        converged,
        objective: *trace.last().expect("trace starts non-empty"),
        trace,
    }
}

/// Spatial median: minimizer of `n⁻¹ Σ (‖yᵢ − μ‖ − ‖yᵢ‖)`.
pub fn spatial_median(data: &DataMatrix, cfg: &SolverConfig) -> Result<LocationFit> {
    let mut fit = spatial_median_point(data, cfg)?;
    fit.cov_of_estimate = if Observations(data).all_equal() {
        Some(SymMatrix::zeros(data.p()))
    } else {
        median_sandwich(data, &fit.estimate)
    };
    Ok(fit)
}

/// [`spatial_median`] without the covariance estimate.
pub fn spatial_median_point(data: &DataMatrix, cfg: &SolverConfig) -> Result<LocationFit> {
    cfg.validate()?;
    Ok(run_to_fit(weiszfeld(&Observations(data), cfg)))
}

/// Spatial Hodges–Lehmann estimator: spatial median of the Walsh averages.
pub fn hl_estimator(data: &DataMatrix, cfg: &SolverConfig) -> Result<LocationFit> {
    let mut fit = hl_point(data, cfg)?;
    fit.cov_of_estimate = if Observations(data).all_equal() {
        Some(SymMatrix::zeros(data.p()))
    } else {
        hl_sandwich(data, &fit.estimate, cfg.bhat_mode)
    };
    Ok(fit)
}

/// [`hl_estimator`] without the covariance estimate, which dominates the
/// cost when `p` is large.
pub fn hl_point(data: &DataMatrix, cfg: &SolverConfig) -> Result<LocationFit> {
    cfg.validate()?;
    let cloud = WalshCloud(walsh_averages(data)?);
    Ok(run_to_fit(weiszfeld(&cloud, cfg)))
}

fn run_to_fit(run: WeiszfeldRun) -> LocationFit {
    LocationFit {
        estimate: run.estimate,
        cov_of_estimate: None,
        iterations: run.iterations,
        converged: run.converged,
        objective: run.objective,
        objective_trace: run.trace,
    }
}

fn sandwich(a: &SymMatrix, b: &SymMatrix, factor: f64) -> Option<SymMatrix> {
    let a_inv = a.inverse().ok()?;
    let c = b.congruence(a_inv.as_slice()).ok()?;
    Some(c.scaled(factor))
}

fn median_sandwich(data: &DataMatrix, center: &[f64]) -> Option<SymMatrix> {
    let a = ahat_median(data, center).ok()?;
    let b = bhat_median(data, center).ok()?;
    sandwich(&a, &b, 1.0 / data.n() as f64)
}

fn hl_sandwich(data: &DataMatrix, center: &[f64], mode: BhatMode) -> Option<SymMatrix> {
    let a = ahat_hl(data, center).ok()?;
    a.inverse().ok()?;
    let b = bhat_hl(data, center, mode).ok()?;
    sandwich(&a, &b, 4.0 / data.n() as f64)
}

/// `d₁ₙ(μ) = n⁻¹ Σ (‖yᵢ − μ‖ − ‖yᵢ‖)`.
pub fn median_objective(data: &DataMatrix, mu: &[f64]) -> f64 {
    let cloud = Observations(data);
    (cloud.sweep(mu, 0.0).dist_sum - cloud.norm_sum()) / data.n() as f64
}

/// `d₂ₙ(μ) = C(n,2)⁻¹ Σ_{i<j} (‖z_ij − μ‖ − ‖z_ij‖)`.
pub fn hl_objective(data: &DataMatrix, mu: &[f64]) -> Result<f64> {
    let cloud = WalshCloud(walsh_averages(data)?);
    Ok((cloud.sweep(mu, 0.0).dist_sum - cloud.norm_sum()) / cloud.count() as f64)
}

/// Gradient of `d₂ₙ` at `μ`: `−C(n,2)⁻¹ Σ u(z_ij − μ)`. Walsh averages equal
/// to `μ` contribute zero.
pub fn hl_gradient(data: &DataMatrix, mu: &[f64]) -> Result<Vec<f64>> {
    let cloud = WalshCloud(walsh_averages(data)?);
    let s = cloud.sweep(mu, 0.0);
    let m = cloud.count() as f64;
    Ok(s.sign_sum.iter().map(|g| -g / m).collect())
}

/// Gradient of `d₁ₙ` at `μ`: `−n⁻¹ Σ u(yᵢ − μ)`.
pub fn median_gradient(data: &DataMatrix, mu: &[f64]) -> Vec<f64> {
    let s = Observations(data).sweep(mu, 0.0);
    let n = data.n() as f64;
    s.sign_sum.iter().map(|g| -g / n).collect()
}

/// Residuals shorter than this are rounding noise around an exact
/// coincidence with `center` and count as zero (`u(0) = 0`).
fn zero_radius(data: &DataMatrix, center: &[f64]) -> f64 {
    let big = data
        .as_slice()
        .iter()
        .chain(center)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    8.0 * f64::EPSILON * (data.p() as f64).sqrt() * big
}

/// `Â = n⁻¹ Σ A(yᵢ − center)`.
pub fn ahat_median(data: &DataMatrix, center: &[f64]) -> Result<SymMatrix> {
    let centered = data.centered(center)?;
    let zr = zero_radius(data, center);
    let p = data.p();
    let mut acc = vec![0.0; p * p];
    for e in centered.rows() {
        let r = norm(e);
        if r > zr {
            add_hessian(&mut acc, e, r, 1.0);
        }
    }
    Ok(SymMatrix::symmetrized(p, &acc).scaled(1.0 / data.n() as f64))
}

/// `B̂ = n⁻¹ Σ u(yᵢ − center) u(yᵢ − center)ᵀ`.
pub fn bhat_median(data: &DataMatrix, center: &[f64]) -> Result<SymMatrix> {
    let centered = data.centered(center)?;
    let zr = zero_radius(data, center);
    let p = data.p();
    let mut acc = vec![0.0; p * p];
    for e in centered.rows() {
        let r = norm(e);
        if r > zr {
            add_outer(&mut acc, e, e, 1.0 / (r * r));
        }
    }
    Ok(SymMatrix::symmetrized(p, &acc).scaled(1.0 / data.n() as f64))
}

/// `Â = C(n,2)⁻¹ Σ_{i<j} A(z_ij − center)`, one streaming pass.
pub fn ahat_hl(data: &DataMatrix, center: &[f64]) -> Result<SymMatrix> {
    let centered = data.centered(center)?;
    let zr = zero_radius(data, center);
    let stream = walsh_averages(&centered)?;
    let p = data.p();
    let blocks = stream.fold_rows(
        || vec![0.0; p * p],
        |acc, _, _, z| {
            let r = norm(z);
            if r > zr {
                add_hessian(acc, z, r, 1.0);
            }
        },
    );
    let mut acc = vec![0.0; p * p];
    for b in &blocks {
        add_scaled(&mut acc, b, 1.0);
    }
    Ok(SymMatrix::symmetrized(p, &acc).scaled(1.0 / stream.count() as f64))
}

/// Sums of the signs of the Walsh averages that involve row `j`:
/// `(Σ_{i<j} u(z_ij), Σ_{k>j} u(z_jk), u(y_j))`.
fn row_sign_sums(data: &DataMatrix, j: usize, zr: f64, buf: &mut [f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = data.p();
    let yj = data.row(j);
    let mut left = vec![0.0; p];
    let mut right = vec![0.0; p];
    for (i, yi) in data.rows().enumerate() {
        if i == j {
            continue;
        }
        for ((b, a), c) in buf.iter_mut().zip(yi).zip(yj) {
            *b = 0.5 * (a + c);
        }
        let r = norm(buf);
        if r > zr {
            let target = if i < j { &mut left } else { &mut right };
            add_scaled(target, buf, 1.0 / r);
        }
    }
    let r = norm(yj);
    let own = if r > zr {
        yj.iter().map(|v| v / r).collect()
    } else {
        vec![0.0; p]
    };
    (left, right, own)
}

/// `Σ_j f(j)` of p×p contributions, reduced over fixed row chunks.
fn chunked_matrix_sum<F>(n: usize, p: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; p * p];
            let mut buf = vec![0.0; p];
            for j in (c * ROW_CHUNK)..((c + 1) * ROW_CHUNK).min(n) {
                f(j, &mut acc, &mut buf);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; p * p];
    for c in &chunks {
        add_scaled(&mut total, c, 1.0);
    }
    total
}

/// `B̂` for the HL sandwich and the signed-rank test, evaluated on
/// `yᵢ − center`.
pub fn bhat_hl(data: &DataMatrix, center: &[f64], mode: BhatMode) -> Result<SymMatrix> {
    let centered = data.centered(center)?;
    let zr = zero_radius(data, center);
    let n = data.n();
    let p = data.p();
    match mode.resolve(n) {
        BhatMode::ExactTriples => {
            if n < 3 {
                return Err(Error::InvalidInput(format!(
                    "exact-triple B̂ needs n ≥ 3, got {n}"
                )));
            }
            let total = chunked_matrix_sum(n, p, |j, acc, buf| {
                let (left, right, _) = row_sign_sums(&centered, j, zr, buf);
                add_outer(acc, &left, &right, 1.0);
            });
            let triples = binom3(n) as f64;
            Ok(SymMatrix::symmetrized(p, &total).scaled(1.0 / triples))
        }
        BhatMode::RankBased => {
            if n < 2 {
                return Err(Error::InvalidInput(format!(
                    "rank-based B̂ needs n ≥ 2, got {n}"
                )));
            }
            let inv_n = 1.0 / n as f64;
            let total = chunked_matrix_sum(n, p, |j, acc, buf| {
                let (left, right, own) = row_sign_sums(&centered, j, zr, buf);
                let q: Vec<f64> = (0..p).map(|c| inv_n * (left[c] + right[c] + own[c])).collect();
                add_outer(acc, &q, &q, 1.0);
            });
            Ok(SymMatrix::symmetrized(p, &total).scaled(inv_n))
        }
        BhatMode::Subsampled { triples, seed } => {
            if n < 3 {
                return Err(Error::InvalidInput(format!(
                    "subsampled B̂ needs n ≥ 3, got {n}"
                )));
            }
            let total_triples = binom3(n);
            if (triples as u128) >= total_triples {
                return bhat_hl(&centered, &vec![0.0; p], BhatMode::ExactTriples);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picks = rand::seq::index::sample(&mut rng, total_triples as usize, triples);
            let mut acc = vec![0.0; p * p];
            let mut zij = vec![0.0; p];
            let mut zjk = vec![0.0; p];
            for t in picks.iter() {
                let (i, j, k) = unrank_triple(t as u128);
                for c in 0..p {
                    zij[c] = 0.5 * (centered.row(i)[c] + centered.row(j)[c]);
                    zjk[c] = 0.5 * (centered.row(j)[c] + centered.row(k)[c]);
                }
                let (rij, rjk) = (norm(&zij), norm(&zjk));
                if rij > zr && rjk > zr {
                    add_outer(&mut acc, &zij, &zjk, 1.0 / (rij * rjk));
                }
            }
            Ok(SymMatrix::symmetrized(p, &acc).scaled(1.0 / triples as f64))
        }
        BhatMode::Auto => unreachable!("resolved above"),
    }
}

fn binom3(n: usize) -> u128 {
    let n = n as u128;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

fn binom2(n: u128) -> u128 {
    if n < 2 {
        0
    } else {
        n * (n - 1) / 2
    }
}

/// Inverse of the colex rank `C(k,3) + C(j,2) + i` over `i < j < k`.
fn unrank_triple(t: u128) -> (usize, usize, usize) {
    let mut k = 2u128;
    while binom3(k as usize + 1) <= t {
        k += 1;
    }
    let rest = t - binom3(k as usize);
    let mut j = 1u128;
    while binom2(j + 1) <= rest {
        j += 1;
    }
    let i = rest - binom2(j);
    (i as usize, j as usize, k as usize)
}
