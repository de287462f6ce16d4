use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × p` matrix of observations, one row per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds from row-major values. Requires `n ≥ 1`, `p ≥ 2` and finite
    /// entries.
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("data has no rows".into()));
        }
        if p < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2, got {p}"
            )));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values for {n}x{p} data, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Applies `f` to each row, keeping the dimension.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            let mapped = f(row);
            if mapped.len() != self.p {
                return Err(Error::InvalidInput("row map changed the dimension".into()));
            }
            values.extend(mapped);
        }
        Self::new(self.n, self.p, values)
    }

    /// `Y · Bᵀ + 1·aᵀ` for a row-major `p × p` matrix `B` and shift `a`.
    pub fn affine(&self, b: &[f64], shift: &[f64]) -> Result<Self> {
        let p = self.p;
        if b.len() != p * p || shift.len() != p {
            return Err(Error::InvalidInput("affine map dimension mismatch".into()));
        }
        self.map_rows(|y| {
            (0..p)
                .map(|i| (0..p).map(|k| b[i * p + k] * y[k]).sum::<f64>() + shift[i])
                .collect()
        })
    }

    /// `yᵢ − center` for every row.
    pub fn centered(&self, center: &[f64]) -> Result<Self> {
        if center.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "center has length {}, expected {}",
                center.len(),
                self.p
            )));
        }
        self.map_rows(|y| y.iter().zip(center).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.p, self.values.iter().map(|v| v * c).collect())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }
}
