//! Dense row-major matrix and the few linear-algebra helpers the models need.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} values for a {rows}x{cols} matrix", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!("{cols} columns"), format!("{} in row {i}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let cols = columns.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::shape(format!("{rows} rows"), bad.len()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(columns.iter().map(|c| c[i]));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let width = self.cols.max(1);
        self.data.chunks_exact(width).take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape(format!("{} columns", self.cols), other.cols));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Appends `other`'s columns to the right of `self`.
    pub fn hstack(&self, other: &Matrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape(format!("{} rows", self.rows), other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for r in self.rows_iter() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.rows.max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Population covariance (divisor n).
    pub fn covariance(&self) -> Vec<f64> {
        let p = self.cols;
        let means = self.column_means();
        let mut cov = vec![0.0; p * p];
        for r in self.rows_iter() {
            for a in 0..p {
                let da = r[a] - means[a];
                for b in a..p {
                    cov[a * p + b] += da * (r[b] - means[b]);
                }
            }
        }
        let n = self.rows.max(1) as f64;
        for a in 0..p {
            for b in a..p {
                let v = cov[a * p + b] / n;
                cov[a * p + b] = v;
                cov[b * p + a] = v;
            }
        }
        cov
    }
}

/// Solves `a x = b` for a symmetric positive-definite `a` (row-major, dim×dim).
/// Returns `None` when the Cholesky factorization fails or the system is
/// numerically singular.
pub(crate) fn solve_spd(a: &[f64], dim: usize, b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(dim, dim, a);
    let scale = (0..dim).map(|i| a[i * dim + i].abs()).fold(0.0, f64::max);
    let chol = m.cholesky()?;
    let l = chol.l();
    let min_pivot = (0..dim).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if dim > 0 && !(min_pivot > scale * 1e-13) {
        return None;
    }
    let x = chol.solve(&DVector::from_column_slice(b));
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Weighted least squares with an unpenalized intercept and ridge penalty
/// `lambda` on the slopes. Returns `(intercept, coefficients)`.
pub(crate) fn weighted_least_squares(
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> Option<(f64, Vec<f64>)> {
    let n = x.nrows();
    let p = x.ncols();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w).sum();
    if !(wsum > 0.0) {
        return None;
    }
    let mut xbar = vec![0.0; p];
    let mut ybar = 0.0;
    for i in 0..n {
        let wi = w(i);
        for (acc, v) in xbar.iter_mut().zip(x.row(i)) {
            *acc += wi * v;
        }
        ybar += wi * y[i];
    }
    xbar.iter_mut().for_each(|v| *v /= wsum);
    ybar /= wsum;

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut centered = vec![0.0; p];
    for i in 0..n {
        let wi = w(i);
        for (c, (v, m)) in centered.iter_mut().zip(x.row(i).iter().zip(&xbar)) {
            *c = v - m;
        }
        let dy = y[i] - ybar;
        for a in 0..p {
            let wa = wi * centered[a];
            rhs[a] += wa * dy;
            for b in a..p {
                gram[a * p + b] += wa * centered[b];
            }
        }
    }
    for a in 0..p {
        gram[a * p + a] += lambda;
        for b in 0..a {
            gram[a * p + b] = gram[b * p + a];
        }
    }
    let beta = if p == 0 { Vec::new() } else { solve_spd(&gram, p, &rhs)? };
    let intercept = ybar - beta.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    Some((intercept, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_columns_round_trips_rows() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(0), &[1.0, 3.0]);
        assert_eq!(m.column(1), vec![3.0, 4.0]);
    }

    #[test]
    fn covariance_is_symmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 0.5], [2.0, 1.0, 0.0], [4.0, 0.0, 1.0], [0.0, 3.0, 2.0]]).unwrap();
        let c = m.covariance();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(c[a * 3 + b], c[b * 3 + a]);
            }
        }
    }

    #[test]
    fn singular_spd_is_rejected() {
        assert!(solve_spd(&[1.0, 1.0, 1.0, 1.0], 2, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn wls_recovers_line() {
        let x = Matrix::from_columns(&[vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b0, b) = weighted_least_squares(&x, &y, None, 0.0).unwrap();
        assert!((b0 - 1.0).abs() < 1e-12 && (b[0] - 2.0).abs() < 1e-12);
    }
}
