//! Deterministic linear dimensionality reduction.
//!
//! [`pca_fit`] eigendecomposes the sample covariance of the centered data and
//! keeps the top `k` eigenvectors. Eigenpairs are ordered by decreasing
//! eigenvalue (ties by solver index) and each basis column is signed so that
//! its largest-magnitude entry (lowest index on ties) is non-negative, which
//! makes the projection bit-reproducible.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("cannot keep {k} components from {n} rows of dimension {d}")]
    TooManyComponents { k: usize, n: usize, d: usize },
    #[error("PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("input has non-finite values")]
    NonFinite,
    #[error("expected {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Maps `d`-dimensional rows to `k` dimensions.
pub trait Reducer: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn transform(&self, x: &Matrix) -> Result<Matrix, ReduceError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// `d x k`, orthonormal columns.
    pub basis: Matrix,
    /// Share of total variance per component, non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    /// Set when the input had zero variance; the basis is then the first `k`
    /// coordinate axes.
    pub degenerate: bool,
}

pub fn pca_fit(x: &Matrix, k: usize) -> Result<Projection, ReduceError> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(ReduceError::TooFewRows(n));
    }
    if k == 0 || k > n.min(d) {
        return Err(ReduceError::TooManyComponents { k, n, d });
    }
    if !x.all_finite() {
        return Err(ReduceError::NonFinite);
    }
    let mean = x.column_means();
    let mut centered = DMatrix::from_row_slice(n, d, x.as_slice());
    for (j, m) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-m);
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    let total: f64 = cov.diagonal().iter().sum();

    if total <= 0.0 {
        let mut basis = Matrix::zeros(d, k);
        for c in 0..k {
            basis.set(c, c, 1.0);
        }
        return Ok(Projection { mean, basis, explained_variance_ratio: vec![0.0; k], degenerate: true });
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut basis = Matrix::zeros(d, k);
    let mut ratios = Vec::with_capacity(k);
    for (c, &src) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            basis.set(i, c, sign * col[i]);
        }
        ratios.push((eig.eigenvalues[src].max(0.0) / total).min(1.0));
    }
    Ok(Projection { mean, basis, explained_variance_ratio: ratios, degenerate: false })
}

/// `(x - mean) * basis`.
pub fn pca_transform(p: &Projection, x: &Matrix) -> Result<Matrix, ReduceError> {
    let d = p.mean.len();
    if x.cols() != d {
        return Err(ReduceError::DimensionMismatch { expected: d, found: x.cols() });
    }
    let k = p.basis.cols();
    let mut out = vec![0.0; x.rows() * k];
    if k == 0 {
        return Ok(Matrix::new(x.rows(), 0, out));
    }
    out.par_chunks_mut(k).enumerate().for_each(|(i, dst)| {
        for (j, (&v, &m)) in x.row(i).iter().zip(&p.mean).enumerate() {
            let c = v - m;
            if c == 0.0 {
                continue;
            }
            for (o, b) in dst.iter_mut().zip(p.basis.row(j)) {
                *o += c * b;
            }
        }
    });
    Ok(Matrix::new(x.rows(), k, out))
}

impl Projection {
    pub fn project_vector(&self, v: &[f64]) -> Result<Vec<f64>, ReduceError> {
        let m = Matrix::new(1, v.len(), v.to_vec());
        Ok(pca_transform(self, &m)?.into_vec())
    }
}

impl Reducer for Projection {
    fn input_dim(&self) -> usize {
        self.mean.len()
    }

    fn output_dim(&self) -> usize {
        self.basis.cols()
    }

    fn transform(&self, x: &Matrix) -> Result<Matrix, ReduceError> {
        pca_transform(self, x)
    }
}
