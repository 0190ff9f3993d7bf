//! Small dense symmetric-matrix helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a symmetric matrix is treated as
/// not positive definite: `λ_min <= DEFAULT_REL_TOL * λ_max`.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// A square matrix stored exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds from row-major rows; the input must be square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("symmetric matrix rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `(λ_min, λ_max)`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0.0, 0.0),
        }
    }

    pub fn is_positive_definite(&self, rel_tol: f64) -> bool {
        self.check_pd(rel_tol).is_ok()
    }

    /// Fails with `NotPositiveDefinite` unless `λ_min > rel_tol * λ_max` and
    /// `λ_max > 0`.
    pub fn check_pd(&self, rel_tol: f64) -> Result<()> {
        let (min, max) = self.eigen_range();
        if max > 0.0 && min > rel_tol * max {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite { min, max })
        }
    }

    /// Solves `self · X = rhs` after the positive-definiteness check.
    pub fn pd_solve(&self, rhs: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
        self.check_pd(rel_tol)?;
        self.cholesky_solve(rhs)
    }

    pub fn pd_solve_vec(&self, rhs: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
        self.check_pd(rel_tol)?;
        let chol = self.cholesky()?;
        Ok(chol.solve(rhs))
    }

    /// Cholesky solve without the eigenvalue screen; only fails when the
    /// factorization itself breaks down.
    pub(crate) fn cholesky_solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.cholesky()?.solve(rhs))
    }

    fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.0.clone().cholesky().ok_or_else(|| {
            let (min, max) = self.eigen_range();
            Error::NotPositiveDefinite { min, max }
        })
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky_factor(&self, rel_tol: f64) -> Result<DMatrix<f64>> {
        self.check_pd(rel_tol)?;
        Ok(self.cholesky()?.l())
    }

    /// `xᵀ · self · x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        (self.0.transpose() * x).dot(x)
    }

    pub fn scale(&self, k: f64) -> Self {
        SymMatrix(&self.0 * k)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "cannot add {0}x{0} and {1}x{1} matrices",
                self.dim(),
                other.dim()
            )));
        }
        Ok(SymMatrix(&self.0 + &other.0))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        crate::serde_mat::to_rows(&self.0)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::serde_mat::serialize(&self.0, s)
    }
}

/// Symmetric inverse square root `Y = M^{-1/2}` via eigendecomposition, so
/// that `Y M Y = I`.
pub fn sym_inv_sqrt(m: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    let eig = SymmetricEigen::new(m.0.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0 && min > rel_tol * max) {
        return Err(Error::NotPositiveDefinite { min, max });
    }
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()),
    );
    let q = &eig.eigenvectors;
    let y = q * DMatrix::from_diagonal(&scaled) * q.transpose();
    Ok(SymMatrix::symmetrize(y))
}
