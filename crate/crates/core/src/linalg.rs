//! Dense real matrices and the power-iteration operator norm.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Error, Result};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Work below this many entries stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return config(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds the matrix row by row in parallel from `entry(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut data = vec![0.0; rows * cols];
        let fill = |(i, row): (usize, &mut [f64])| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = entry(i, j);
            }
        };
        if rows * cols >= PAR_THRESHOLD {
            data.par_chunks_mut(cols.max(1)).enumerate().for_each(fill);
        } else {
            data.chunks_mut(cols.max(1)).enumerate().for_each(fill);
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `y = M x` for complex `x`; each row is summed sequentially so the
    /// result does not depend on the thread count.
    pub fn mul_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(
            x.len(),
            self.cols,
            "dimension mismatch in matrix-vector product"
        );
        let row_dot = |i: usize| {
            let row = self.row(i);
            let (mut re, mut im) = (0.0, 0.0);
            for (a, v) in row.iter().zip(x) {
                re += a * v.re;
                im += a * v.im;
            }
            Complex64::new(re, im)
        };
        if self.data.len() >= PAR_THRESHOLD {
            (0..self.rows).into_par_iter().map(row_dot).collect()
        } else {
            (0..self.rows).map(row_dot).collect()
        }
    }

    /// `y = M x` for real `x`.
    pub fn mul_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.cols,
            "dimension mismatch in matrix-vector product"
        );
        let row_dot = |i: usize| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        if self.data.len() >= PAR_THRESHOLD {
            (0..self.rows).into_par_iter().map(row_dot).collect()
        } else {
            (0..self.rows).map(row_dot).collect()
        }
    }

    /// `y = Mᵀ x` for real `x`.
    pub fn mul_transpose_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.rows,
            "dimension mismatch in transposed product"
        );
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a * xi;
            }
        }
        y
    }

    /// Dense product `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return config(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let ot = other.transpose();
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            self.row(i).iter().zip(ot.row(j)).map(|(a, b)| a * b).sum()
        }))
    }

    /// Multiplies row `i` by `left[i]` and column `j` by `right[j]`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> DenseMatrix {
        Self::from_fn(self.rows, self.cols, |i, j| {
            left[i] * self.get(i, j) * right[j]
        })
    }
}

/// A real linear map given by its action and the action of its adjoint,
/// both with respect to the plain Euclidean inner product.
pub trait LinearMap: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;
}

impl LinearMap for DenseMatrix {
    fn dim_in(&self) -> usize {
        self.cols
    }
    fn dim_out(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.mul_real(x)
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.mul_transpose_real(y)
    }
}

/// Outcome of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub relative_change: f64,
    pub converged: bool,
}

/// Largest singular value by power iteration on `TᵀT`.
///
/// The start vector is deterministic. Stops once successive estimates change by
/// less than `tol` relative; fails with an estimation error after `max_iter`.
pub fn power_norm(op: &dyn LinearMap, tol: f64, max_iter: usize) -> Result<NormEstimate> {
    let n = op.dim_in();
    if n == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            iterations: 0,
            relative_change: 0.0,
            converged: true,
        });
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).fract())
        .collect();
    normalize(&mut v);
    let mut sigma_sq = 0.0_f64;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let mut w = op.apply_adjoint(&op.apply(&v));
        let lam = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
                relative_change: 0.0,
                converged: true,
            });
        }
        for x in w.iter_mut() {
            *x /= nw;
        }
        v = w;
        if sigma_sq > 0.0 {
            change = ((lam - sigma_sq) / lam).abs();
        }
        sigma_sq = lam;
        if change < tol {
            return Ok(NormEstimate {
                value: sigma_sq.max(0.0).sqrt(),
                iterations: it,
                relative_change: change,
                converged: true,
            });
        }
    }
    Err(Error::Estimation {
        message: format!("power iteration did not converge in {max_iter} steps"),
        residual: change,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    for x in v.iter_mut() {
        *x /= n;
    }
}
