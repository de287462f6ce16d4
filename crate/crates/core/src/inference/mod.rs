//! One-sample location tests and confidence ellipsoids.
//!
//! The sign and signed-rank tests studentize a mean of spatial signs by the
//! matching `B̂` (computed about the null location 0) and are referred to
//! `χ²_p`. Hotelling's T² is included as the classical reference.

pub mod chi2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

pub use chi2::{chi2_cdf, chi2_quantile, chi2_sf};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::location::{bhat_hl, bhat_median, BhatMode, LocationFit};
use crate::matalg::SymMatrix;
use crate::signs::{add_scaled, norm, spatial_sign, walsh_averages};
use crate::sim::{sample, SimSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    /// Denominator degrees of freedom for F-calibrated statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df2: Option<usize>,
    pub p_value: f64,
    pub method: String,
}

/// `{x : (x − center)ᵀ shape⁻¹ (x − center) ≤ radius2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub shape: SymMatrix,
    pub radius2: f64,
}

impl Ellipsoid {
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        Ok(self.shape.inverse()?.quad_form(&d)? <= self.radius2)
    }
}

/// `q_n = C(n,2)⁻¹ Σ_{i<j} u(z_ij)`, the negative gradient of the HL
/// criterion at 0.
pub fn signed_rank_statistic(data: &DataMatrix) -> Result<Vec<f64>> {
    let stream = walsh_averages(data)?;
    let p = data.p();
    let blocks = stream.fold_rows(
        || vec![0.0; p],
        |acc, _, _, z| {
            let r = norm(z);
            if r > 0.0 {
                add_scaled(acc, z, 1.0 / r);
            }
        },
    );
    let mut q = vec![0.0; p];
    for b in &blocks {
        add_scaled(&mut q, b, 1.0);
    }
    let m = stream.count() as f64;
    q.iter_mut().for_each(|v| *v /= m);
    Ok(q)
}

fn chi2_result(statistic: f64, df: usize, method: &str) -> Result<TestResult> {
    Ok(TestResult {
        statistic,
        df,
        df2: None,
        p_value: chi2_sf(statistic, df)?,
        method: method.to_string(),
    })
}

/// `scale · vᵀ B⁻¹ v`, or exactly 0 when `v = 0` whatever `B` is.
fn studentized(v: &[f64], b: &SymMatrix, scale: f64) -> Result<f64> {
    if v.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let inv = b
        .inverse()
        .map_err(|e| Error::DegenerateCovariance(format!("B̂ is not invertible: {e}")))?;
    Ok(scale * inv.quad_form(v)?.max(0.0))
}

/// Spatial signed-rank test of `H₀: μ = 0`: `(n/4) q_nᵀ B̂⁻¹ q_n ~ χ²_p`.
pub fn signed_rank_test(data: &DataMatrix, mode: BhatMode) -> Result<TestResult> {
    let q = signed_rank_statistic(data)?;
    let b = bhat_hl(data, &vec![0.0; data.p()], mode)?;
    let stat = studentized(&q, &b, data.n() as f64 / 4.0)?;
    chi2_result(stat, data.p(), "spatial-signed-rank")
}

/// Spatial sign test of `H₀: μ = 0`: `n ūᵀ B̂⁻¹ ū ~ χ²_p` with
/// `ū = n⁻¹ Σ u(yᵢ)`.
pub fn sign_test(data: &DataMatrix) -> Result<TestResult> {
    let p = data.p();
    let mut mean = vec![0.0; p];
    for y in data.rows() {
        add_scaled(&mut mean, &spatial_sign(y), 1.0);
    }
    mean.iter_mut().for_each(|v| *v /= data.n() as f64);
    let b = bhat_median(data, &vec![0.0; p])?;
    let stat = studentized(&mean, &b, data.n() as f64)?;
    chi2_result(stat, p, "spatial-sign")
}

/// Hotelling's one-sample T² test of `H₀: μ = 0`, F-calibrated.
pub fn hotelling_t2(data: &DataMatrix) -> Result<TestResult> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::Underdetermined { n, p });
    }
    let mean = data.column_means();
    let mut cov = vec![0.0; p * p];
    for y in data.rows() {
        let d: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
        crate::signs::add_outer(&mut cov, &d, &d, 1.0 / (n - 1) as f64);
    }
    let cov = SymMatrix::symmetrized(p, &cov);
    let t2 = studentized(&mean, &cov, n as f64)?;
    let f = t2 * (n - p) as f64 / (p * (n - 1)) as f64;
    let dist = FisherSnedecor::new(p as f64, (n - p) as f64)
        .map_err(|e| Error::InvalidInput(format!("F distribution: {e}")))?;
    Ok(TestResult {
        statistic: t2,
        df: p,
        df2: Some(n - p),
        p_value: dist.sf(f).clamp(0.0, 1.0),
        method: "hotelling-t2".to_string(),
    })
}

/// Confidence ellipsoid for a location fit at the given level.
pub fn confidence_ellipsoid(fit: &LocationFit, level: f64) -> Result<Ellipsoid> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let shape = fit.cov_of_estimate.clone().ok_or_else(|| {
        Error::DegenerateCovariance("fit has no covariance estimate".into())
    })?;
    shape
        .check_spd()
        .map_err(|e| Error::DegenerateCovariance(format!("covariance is not SPD: {e}")))?;
    Ok(Ellipsoid {
        center: fit.estimate.clone(),
        radius2: chi2_quantile(level, shape.dim())?,
        shape,
    })
}

/// Which test a calibration run applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    Sign,
    SignedRank(BhatMode),
    Hotelling,
}

pub fn run_test(kind: TestKind, data: &DataMatrix) -> Result<TestResult> {
    match kind {
        TestKind::Sign => sign_test(data),
        TestKind::SignedRank(mode) => signed_rank_test(data, mode),
        TestKind::Hotelling => hotelling_t2(data),
    }
}

/// Null-distribution summary from repeated sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStudy {
    pub statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub alpha: f64,
    pub rejection_rate: f64,
}

/// Applies `kind` to every replication of `spec` (data centred at 0, so the
/// null holds) and reports how often it rejects at level `alpha`.
pub fn size_study(spec: &SimSpec, kind: TestKind, alpha: f64) -> Result<SizeStudy> {
    spec.validate()?;
    let results: Vec<TestResult> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| run_test(kind, &sample(spec, rep)?))
        .collect::<Result<_>>()?;
    let rejections = results.iter().filter(|r| r.p_value < alpha).count();
    Ok(SizeStudy {
        statistics: results.iter().map(|r| r.statistic).collect(),
        p_values: results.iter().map(|r| r.p_value).collect(),
        alpha,
        rejection_rate: rejections as f64 / results.len() as f64,
    })
}

/// Pearson goodness-of-fit of `values` against `χ²_df` using `bins`
/// equal-probability cells.
pub fn chi2_goodness_of_fit(values: &[f64], df: usize, bins: usize) -> Result<TestResult> {
    if bins < 2 || values.is_empty() {
        return Err(Error::InvalidInput("goodness of fit needs ≥ 2 bins and data".into()));
    }
    let edges: Vec<f64> = (1..bins)
        .map(|k| chi2_quantile(k as f64 / bins as f64, df))
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[edges.partition_point(|&e| e <= v)] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    chi2_result(stat, bins - 1, "chi2-goodness-of-fit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::location::{hl_estimator, SolverConfig};
    use crate::signs::tests::{mat_vec, random_orthogonal};
    use crate::sim::Family;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(n, p, (0..n * p).map(|_| rng.random_range(-1.0..1.5)).collect()).unwrap()
    }

    #[test]
    fn signed_rank_statistic_examples() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0]]).unwrap();
        assert_eq!(signed_rank_statistic(&d).unwrap(), vec![0.0, 0.0]);
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![5.0, 0.0, 0.0]])
            .unwrap();
        assert_eq!(signed_rank_statistic(&d).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn signed_rank_statistic_is_negative_gradient() {
        let d = seeded(9, 3, 2);
        let q = signed_rank_statistic(&d).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut plus = vec![0.0; 3];
            let mut minus = vec![0.0; 3];
            plus[c] = h;
            minus[c] = -h;
            let fd = (crate::location::hl_objective(&d, &plus).unwrap()
                - crate::location::hl_objective(&d, &minus).unwrap())
                / (2.0 * h);
            assert!((fd + q[c]).abs() < 1e-6, "coord {c}: {fd} vs {}", -q[c]);
        }
    }

    #[test]
    fn zero_statistic_has_unit_p_value() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0]]).unwrap();
        let r = signed_rank_test(&d, BhatMode::RankBased).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.df, 2);
        let r = sign_test(&d).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn signed_rank_hand_computed() {
        let rows = vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 0.0], vec![0.0, 2.0]];
        let d = DataMatrix::from_rows(&rows).unwrap();
        // pairs: one (2,0)+(2,0), one (0,2)+(0,2), four mixed → (1,1)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = [(1.0 + 4.0 * s) / 6.0, (1.0 + 4.0 * s) / 6.0];
        let got = signed_rank_statistic(&d).unwrap();
        assert!((got[0] - q[0]).abs() < 1e-15 && (got[1] - q[1]).abs() < 1e-15);
        let b = bhat_hl(&d, &[0.0, 0.0], BhatMode::RankBased).unwrap();
        let (a, c) = (b.get(0, 0), b.get(0, 1));
        // 2×2 inverse by hand for [[a, c], [c, a]]
        let det = a * a - c * c;
        let quad = (a * q[0] * q[0] - 2.0 * c * q[0] * q[1] + a * q[1] * q[1]) / det;
        let r = signed_rank_test(&d, BhatMode::RankBased).unwrap();
        assert!((r.statistic - 4.0 / 4.0 * quad).abs() < 1e-12);
        assert!((r.p_value - (-r.statistic / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn sign_test_hand_computed() {
        let d = DataMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 2.0], vec![1.0, 0.0]]).unwrap();
        // ū = (2/3, 1/3); B̂ = diag(2/3, 1/3); n ūᵀB̂⁻¹ū = 3·(4/9·3/2 + 1/9·3) = 3
        let r = sign_test(&d).unwrap();
        assert!((r.statistic - 3.0).abs() < 1e-14);
        assert!((r.p_value - (-1.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_bhat_is_reported() {
        let d = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert!(matches!(
            signed_rank_test(&d, BhatMode::ExactTriples),
            Err(Error::DegenerateCovariance(_))
        ));
        assert!(matches!(sign_test(&d), Err(Error::DegenerateCovariance(_))));
    }

    #[test]
    fn hotelling_examples() {
        let d = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0], vec![-2.0, 1.0]])
            .unwrap();
        let r = hotelling_t2(&d).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        // ȳ = (1, 2); S = [[1, 0], [0, 4]] (n = 3): T² = 3·(1 + 1) = 6
        let d = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0], vec![1.0, 4.0]]).unwrap();
        let mean = d.column_means();
        assert_eq!(mean, vec![1.0, 2.0]);
        let r = hotelling_t2(&d).unwrap();
        // sample covariance: var1 = 1, var2 = 4, cov = (−1·−2 + 1·0 + 0·2)/2 = 1
        // T² = 3·ȳᵀS⁻¹ȳ with S⁻¹ = [[4, −1], [−1, 1]]/3 → 3·(4 − 4 + 4)/3 = 4
        assert!((r.statistic - 4.0).abs() < 1e-12);
        let f: f64 = 4.0 * 1.0 / (2.0 * 2.0);
        // F(2, 1) survival: 1/sqrt(1 + 2f)
        assert!((r.p_value - 1.0 / (1.0 + 2.0 * f).sqrt()).abs() < 1e-10);
        assert!(hotelling_t2(&seeded(2, 2, 1)).is_err());
    }

    #[test]
    fn tests_are_rotation_invariant() {
        let d = seeded(20, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = random_orthogonal(3, &mut rng);
        let rotated = d.affine(&o, &[0.0; 3]).unwrap();
        let q0 = signed_rank_statistic(&d).unwrap();
        let q1 = signed_rank_statistic(&rotated).unwrap();
        for (a, b) in mat_vec(&o, &q0).iter().zip(&q1) {
            assert!((a - b).abs() < 1e-12);
        }
        for mode in [BhatMode::ExactTriples, BhatMode::RankBased] {
            let s0 = signed_rank_test(&d, mode).unwrap().statistic;
            let s1 = signed_rank_test(&rotated, mode).unwrap().statistic;
            assert!((s0 - s1).abs() < 1e-8);
        }
        let s0 = sign_test(&d).unwrap().statistic;
        let s1 = sign_test(&rotated).unwrap().statistic;
        assert!((s0 - s1).abs() < 1e-8);
    }

    #[test]
    fn p_value_matches_tail_and_decreases() {
        let mut prev = 1.0;
        for i in 1..100 {
            let r = chi2_result(i as f64 * 0.3, 3, "x").unwrap();
            assert!((r.p_value - (1.0 - chi2_cdf(r.statistic, 3).unwrap())).abs() < 1e-10);
            assert!(r.p_value < prev);
            prev = r.p_value;
        }
    }

    #[test]
    fn ellipsoid_examples() {
        let fit = LocationFit {
            estimate: vec![1.0, 2.0],
            cov_of_estimate: Some(SymMatrix::identity(2)),
            iterations: 0,
            converged: true,
            objective: 0.0,
            objective_trace: vec![],
        };
        let e = confidence_ellipsoid(&fit, 0.95).unwrap();
        assert!((e.radius2 - 5.991_464_547_107_979).abs() < 1e-9);
        assert_eq!(e.shape, SymMatrix::identity(2));
        // a sphere of radius sqrt(radius2)
        assert!(e.contains(&[1.0 + 2.44, 2.0]).unwrap());
        assert!(!e.contains(&[1.0 + 2.45, 2.0]).unwrap());
        assert!(confidence_ellipsoid(&fit, 1e-12).unwrap().radius2 < 1e-10);
        assert!(confidence_ellipsoid(&fit, 1.0).is_err());
        assert!(confidence_ellipsoid(&fit, 0.0).is_err());
        let mut none = fit.clone();
        none.cov_of_estimate = None;
        assert!(matches!(confidence_ellipsoid(&none, 0.9), Err(Error::DegenerateCovariance(_))));
    }

    #[test]
    fn hl_ellipsoid_contains_center() {
        let d = seeded(40, 2, 3);
        let fit = hl_estimator(&d, &SolverConfig::default()).unwrap();
        let e = confidence_ellipsoid(&fit, 0.9).unwrap();
        assert!(e.contains(&fit.estimate).unwrap());
    }

    #[test]
    fn goodness_of_fit_on_exact_quantiles() {
        // perfectly spread values give a zero statistic
        let vals: Vec<f64> = (0..200)
            .map(|k| chi2_quantile((k as f64 + 0.5) / 200.0, 3).unwrap())
            .collect();
        let r = chi2_goodness_of_fit(&vals, 3, 20).unwrap();
        assert!(r.statistic < 1e-12);
        assert_eq!(r.df, 19);
        let skewed = vec![0.1; 100];
        assert!(chi2_goodness_of_fit(&skewed, 3, 20).unwrap().p_value < 1e-10);
    }

    #[test]
    fn small_size_study_is_sane() {
        let spec = SimSpec {
            n: 60,
            p: 2,
            family: Family::Normal,
            seed: 7,
            replications: 200,
        };
        for kind in [TestKind::Sign, TestKind::SignedRank(BhatMode::RankBased), TestKind::Hotelling] {
            let s = size_study(&spec, kind, 0.05).unwrap();
            assert_eq!(s.statistics.len(), 200);
            assert!(s.rejection_rate < 0.12, "{kind:?}: {}", s.rejection_rate);
        }
    }
}
