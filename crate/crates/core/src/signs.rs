//! Spatial signs, their derivative matrices, and Walsh-average enumeration.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matalg::SymMatrix;

/// Pair sweeps smaller than this (pairs × dimension) run on the calling thread.
const PARALLEL_PAIR_WORK: usize = 1 << 16;

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn add_scaled(acc: &mut [f64], v: &[f64], c: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += c * x;
    }
}

/// Adds `c · u vᵀ` to a row-major square accumulator.
#[inline]
pub(crate) fn add_outer(acc: &mut [f64], u: &[f64], v: &[f64], c: f64) {
    let p = u.len();
    for i in 0..p {
        let ci = c * u[i];
        if ci == 0.0 {
            continue;
        }
        let row = &mut acc[i * p..(i + 1) * p];
        for (a, x) in row.iter_mut().zip(v) {
            *a += ci * x;
        }
    }
}

/// `u(y) = y/‖y‖`, with `u(0) = 0`.
pub fn spatial_sign(y: &[f64]) -> Vec<f64> {
    let big = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 {
        return vec![0.0; y.len()];
    }
    // rescale first so tiny vectors do not underflow
    let scaled: Vec<f64> = y.iter().map(|v| v / big).collect();
    let r = norm(&scaled);
    scaled.iter().map(|v| v / r).collect()
}

/// Hessian of `‖y‖`: `‖y‖⁻¹ (I − ‖y‖⁻² y yᵀ)`, zero at the origin.
pub fn sign_hessian(y: &[f64]) -> SymMatrix {
    let p = y.len();
    let r = norm(y);
    if r == 0.0 {
        return SymMatrix::zeros(p);
    }
    let mut m = vec![0.0; p * p];
    add_hessian(&mut m, y, r, 1.0);
    SymMatrix::symmetrized(p, &m)
}

/// Adds `c · ‖y‖⁻¹ (I − ‖y‖⁻² y yᵀ)` given `r = ‖y‖ > 0`.
#[inline]
pub(crate) fn add_hessian(acc: &mut [f64], y: &[f64], r: f64, c: f64) {
    let p = y.len();
    let inv = c / r;
    let inv3 = inv / (r * r);
    for i in 0..p {
        acc[i * p + i] += inv;
    }
    add_outer(acc, y, y, -inv3);
}

/// `u(y) u(y)ᵀ`, zero at the origin.
pub fn sign_outer(y: &[f64]) -> SymMatrix {
    let p = y.len();
    let u = spatial_sign(y);
    let mut m = vec![0.0; p * p];
    add_outer(&mut m, &u, &u, 1.0);
    SymMatrix::symmetrized(p, &m)
}

/// One Walsh average `z_{i,j} = (y_i + y_j)/2`, `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshAverage {
    pub i: usize,
    pub j: usize,
    pub z: Vec<f64>,
}

/// Lazy enumeration of the `n(n−1)/2` Walsh averages in lexicographic
/// `(i, j)` order.
#[derive(Debug, Clone, Copy)]
pub struct WalshStream<'a> {
    data: &'a DataMatrix,
}

/// Fails for `n < 2`.
pub fn walsh_averages(data: &DataMatrix) -> Result<WalshStream<'_>> {
    if data.n() < 2 {
        return Err(Error::InvalidInput(
            "Walsh averages need at least two observations".into(),
        ));
    }
    Ok(WalshStream { data })
}

impl<'a> WalshStream<'a> {
    pub fn data(&self) -> &'a DataMatrix {
        self.data
    }

    pub fn count(&self) -> usize {
        let n = self.data.n();
        n * (n - 1) / 2
    }

    pub fn iter(&self) -> impl Iterator<Item = WalshAverage> + 'a {
        let data = self.data;
        let n = data.n();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).map(move |j| WalshAverage {
                i,
                j,
                z: data
                    .row(i)
                    .iter()
                    .zip(data.row(j))
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
            })
        })
    }

    /// Visits `z_{i,j}` for every `j > i`, reusing `buf` for the average.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, buf: &mut [f64], mut f: impl FnMut(usize, &[f64])) {
        let yi = self.data.row(i);
        for j in (i + 1)..self.data.n() {
            let yj = self.data.row(j);
            for ((b, a), c) in buf.iter_mut().zip(yi).zip(yj) {
                *b = 0.5 * (a + c);
            }
            f(j, buf);
        }
    }

    /// Folds each row block `{(i, j) : j > i}` into its own accumulator and
    /// returns them in row order. Callers reduce the blocks sequentially, so
    /// results do not depend on how many threads ran the sweep.
    pub fn fold_rows<A, I, F>(&self, init: I, visit: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(&mut A, usize, usize, &[f64]) + Sync,
    {
        let n = self.data.n();
        let p = self.data.p();
        let block = |i: usize| {
            let mut acc = init();
            let mut buf = vec![0.0; p];
            self.for_each_in_row(i, &mut buf, |j, z| visit(&mut acc, i, j, z));
            acc
        };
        if self.count() * p >= PARALLEL_PAIR_WORK {
            (0..n.saturating_sub(1)).into_par_iter().map(block).collect()
        } else {
            (0..n.saturating_sub(1)).map(block).collect()
        }
    }

    /// Materializes every average; only for small samples and tests.
    pub fn collect_all(&self) -> Vec<Vec<f64>> {
        self.iter().map(|w| w.z).collect()
    }
}

/// Estimated signed-rank function `q̂(e) = n⁻¹ Σᵢ u((eᵢ + e)/2)`.
pub fn signed_rank_fn(data: &DataMatrix, e: &[f64]) -> Vec<f64> {
    let p = data.p();
    let mut acc = vec![0.0; p];
    let mut buf = vec![0.0; p];
    for row in data.rows() {
        for ((b, a), c) in buf.iter_mut().zip(row).zip(e) {
            *b = 0.5 * (a + c);
        }
        let r = norm(&buf);
        if r > 0.0 {
            add_scaled(&mut acc, &buf, 1.0 / r);
        }
    }
    acc.iter_mut().for_each(|a| *a /= data.n() as f64);
    acc
}
