//! Dense symmetric matrices and the spectral operations built on them.
//!
//! Everything downstream (Tyler shapes, sandwich covariances, the
//! standardizing transformation `S^{-1/2}`) goes through [`SymMatrix`], so the
//! symmetry invariant is enforced here once. Eigendecompositions use cyclic
//! Jacobi rotations, which are accurate to working precision for the small
//! dimensions this crate targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue counts as zero.
pub const SPD_FLOOR_REL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;

/// A real symmetric `dim × dim` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
///
/// `vectors` is row-major and eigenvector `k` is column `k`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl SymEigen {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.vectors[i * self.dim + k]).collect()
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.dim;
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += self.vectors[i * p + k] * mapped[k] * self.vectors[j * p + k];
                }
                out[i * p + j] = s;
                out[j * p + i] = s;
            }
        }
        SymMatrix { dim: p, entries: out }
    }

    /// Relative SPD floor: `1e-12 · λ_max`.
    pub fn spd_floor(&self) -> f64 {
        SPD_FLOOR_REL * self.values.first().copied().unwrap_or(0.0).max(0.0)
    }

    fn require_spd(&self) -> Result<()> {
        let floor = self.spd_floor();
        let min = self.values.last().copied().unwrap_or(0.0);
        if !(self.values[0] > 0.0) || min < floor {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
                floor,
            });
        }
        Ok(())
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds from row-major entries, rejecting anything not exactly symmetric.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("matrix rows must be square".into()));
        }
        Self::from_row_major(dim, rows.concat())
    }

    /// Builds `(M + Mᵀ)/2` from an arbitrary square row-major matrix.
    pub fn symmetrized(dim: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim * dim, "square matrix expected");
        let mut out = vec![0.0; dim * dim];
        for i in 0..dim {
            out[i * dim + i] = entries[i * dim + i];
            for j in (i + 1)..dim {
                let v = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                out[i * dim + j] = v;
                out[j * dim + i] = v;
            }
        }
        Self { dim, entries: out }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    /// Entrywise `self − other`.
    pub fn sub(&self, other: &SymMatrix) -> Result<Self> {
        self.check_dim(other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        self.check_dim(other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v.len())?;
        Ok(self
            .entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `vᵀ · M · v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        let mv = self.mul_vec(v)?;
        Ok(mv.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    /// `B · M · Bᵀ` for a general row-major square `B`, symmetrized.
    pub fn congruence(&self, b: &[f64]) -> Result<Self> {
        let p = self.dim;
        if b.len() != p * p {
            return Err(Error::InvalidInput(format!(
                "congruence needs a {p}x{p} matrix"
            )));
        }
        let mut bm = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let bik = b[i * p + k];
                if bik == 0.0 {
                    continue;
                }
                for j in 0..p {
                    bm[i * p + j] += bik * self.entries[k * p + j];
                }
            }
        }
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i * p + j] = (0..p).map(|k| bm[i * p + k] * b[j * p + k]).sum();
            }
        }
        Ok(Self::symmetrized(p, &out))
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> Result<SymEigen> {
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(jacobi_eigen(self))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.values)
    }

    /// Unique symmetric PSD square root. Small negative eigenvalues from
    /// rounding are clamped to zero.
    pub fn sqrt_sym(&self) -> Result<Self> {
        let e = self.eigen()?;
        let floor = e.spd_floor();
        if let Some(&min) = e.values.last() {
            if min < -floor.max(f64::MIN_POSITIVE) {
                return Err(Error::NotPositiveDefinite {
                    min_eigenvalue: min,
                    floor,
                });
            }
        }
        Ok(e.recompose(|l| l.max(0.0).sqrt()))
    }

    /// Symmetric inverse square root `M^{-1/2}`, so that `R·M·R = I`.
    pub fn inv_sqrt(&self) -> Result<Self> {
        let e = self.eigen()?;
        e.require_spd()?;
        Ok(e.recompose(|l| 1.0 / l.sqrt()))
    }

    pub fn inverse(&self) -> Result<Self> {
        let e = self.eigen()?;
        e.require_spd()?;
        Ok(e.recompose(|l| 1.0 / l))
    }

    /// Fails with [`Error::NotPositiveDefinite`] unless every eigenvalue is at
    /// least the relative SPD floor.
    pub fn check_spd(&self) -> Result<()> {
        self.eigen()?.require_spd()
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if other != self.dim {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {other}",
                self.dim
            )));
        }
        Ok(())
    }
}

fn jacobi_eigen(m: &SymMatrix) -> SymEigen {
    let p = m.dim;
    let mut a = m.entries.clone();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let threshold = JACOBI_REL_TOL * m.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * p + j] * a[i * p + j])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for k in 0..p {
            for l in (k + 1)..p {
                let akl = a[k * p + l];
                if akl == 0.0 {
                    continue;
                }
                let akk = a[k * p + k];
                let all = a[l * p + l];
                let theta = (all - akk) / (2.0 * akl);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for r in 0..p {
                    let ark = a[r * p + k];
                    let arl = a[r * p + l];
                    a[r * p + k] = c * ark - s * arl;
                    a[r * p + l] = s * ark + c * arl;
                }
                for r in 0..p {
                    let akr = a[k * p + r];
                    let alr = a[l * p + r];
                    a[k * p + r] = c * akr - s * alr;
                    a[l * p + r] = s * akr + c * alr;
                }
                a[k * p + l] = 0.0;
                a[l * p + k] = 0.0;

                for r in 0..p {
                    let vrk = v[r * p + k];
                    let vrl = v[r * p + l];
                    v[r * p + k] = c * vrk - s * vrl;
                    v[r * p + l] = s * vrk + c * vrl;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y * p + y].total_cmp(&a[x * p + x]));
    let values = order.iter().map(|&k| a[k * p + k]).collect();
    let mut vectors = vec![0.0; p * p];
    for (new_k, &old_k) in order.iter().enumerate() {
        for r in 0..p {
            vectors[r * p + new_k] = v[r * p + old_k];
        }
    }
    SymEigen {
        values,
        vectors,
        dim: p,
    }
}
