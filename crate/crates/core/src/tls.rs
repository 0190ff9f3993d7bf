//! The observation model and the total-least-squares estimator.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Minimizer is flagged non-unique when `σ_n − σ_{n+1} <= GAP_REL_TOL · σ₁`.
pub const GAP_REL_TOL: f64 = 1e-10;
/// `X̂` is reported infinite when `cond(V₂₂)` exceeds this.
pub const V22_COND_MAX: f64 = 1e12;
/// Relative tolerance on the score-equation residual at `X̂`.
pub const SCORE_REL_TOL: f64 = 1e-8;

/// Observed rows `(a_i, b_i)`: `A` is `m×n`, `B` is `m×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EivDataset {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl EivDataset {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != b.nrows() {
            return Err(Error::Dimension(format!(
                "A has {} rows but B has {}",
                a.nrows(),
                b.nrows()
            )));
        }
        if a.nrows() == 0 || a.ncols() == 0 || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "need m, n, d >= 1, got m={}, n={}, d={}",
                a.nrows(),
                a.ncols(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset contains non-finite entries".into()));
        }
        Ok(EivDataset { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn d(&self) -> usize {
        self.b.ncols()
    }

    /// Augmented matrix `C = [A B]`.
    pub fn augmented(&self) -> DMatrix<f64> {
        let (m, n, d) = (self.m(), self.n(), self.d());
        let mut c = DMatrix::zeros(m, n + d);
        c.columns_mut(0, n).copy_from(&self.a);
        c.columns_mut(n, d).copy_from(&self.b);
        c
    }

    /// Residual rows `r_iᵀ = a_iᵀX − b_iᵀ`, i.e. `R = A X − B`.
    pub fn residuals(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * x - &self.b
    }

    /// `Σ a_i b_iᵀ = AᵀB`.
    pub fn cross_moment(&self) -> DMatrix<f64> {
        self.a.transpose() * &self.b
    }

    /// Dataset with rows reordered by `perm` (`perm[i]` is the source row).
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.m() {
            return Err(Error::Dimension("permutation length must equal m".into()));
        }
        let a = DMatrix::from_fn(self.m(), self.n(), |i, j| self.a[(perm[i], j)]);
        let b = DMatrix::from_fn(self.m(), self.d(), |i, j| self.b[(perm[i], j)]);
        Self::new(a, b)
    }

    fn check_x(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.n() || x.ncols() != self.d() {
            return Err(Error::Dimension(format!(
                "X must be {}x{}, got {}x{}",
                self.n(),
                self.d(),
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

/// Result of [`tls_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TlsFit {
    #[serde(with = "crate::serde_mat")]
    pub x_hat: DMatrix<f64>,
    /// Singular values of `[A B]` in descending order.
    pub singular_values: Vec<f64>,
    /// `σ_n − σ_{n+1}`.
    pub singular_gap: f64,
    /// `Q(X̂)`.
    pub loss_at_solution: f64,
    /// `‖Σ s(a_i, b_i; X̂)‖_F / (1 + ‖Σ a_i b_iᵀ‖_F)`.
    pub score_residual: f64,
}

/// `K = I_d + XᵀX`.
pub(crate) fn gram_plus_identity(x: &DMatrix<f64>) -> SymMatrix {
    let d = x.ncols();
    SymMatrix::symmetrize(DMatrix::identity(d, d) + x.transpose() * x)
}

/// `K⁻¹ · rhs` with `K = I_d + XᵀX`; `K` is PD with λ_min ≥ 1, so the
/// Cholesky factorization cannot fail.
pub(crate) fn solve_gram(k: &SymMatrix, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    k.cholesky_solve(rhs)
        .expect("I + XᵀX is positive definite for finite X")
}

/// Elementary loss `q(a, b; X) = (aᵀX − bᵀ)(I_d + XᵀX)⁻¹(Xᵀa − b)`.
pub fn loss_q(a: &DVector<f64>, b: &DVector<f64>, x: &DMatrix<f64>) -> f64 {
    let r = x.transpose() * a - b;
    let k = gram_plus_identity(x);
    let r_mat = DMatrix::from_column_slice(r.len(), 1, r.as_slice());
    let kr = solve_gram(&k, &r_mat);
    r.dot(&kr.column(0))
}

/// `Q(X) = Σ_i q(a_i, b_i; X) = tr(K⁻¹ RᵀR)`.
pub fn loss_total(data: &EivDataset, x: &DMatrix<f64>) -> Result<f64> {
    data.check_x(x)?;
    let r = data.residuals(x);
    let k = gram_plus_identity(x);
    let rtr = r.transpose() * &r;
    Ok(solve_gram(&k, &rtr).trace().max(0.0))
}

/// Estimating function
/// `s(a, b; X) = a(aᵀX − bᵀ) − X(I_d + XᵀX)⁻¹(Xᵀa − b)(aᵀX − bᵀ)`, an `n×d`
/// matrix.
pub fn score_s(a: &DVector<f64>, b: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let r = x.transpose() * a - b;
    let k = gram_plus_identity(x);
    let rrt = &r * r.transpose();
    a * r.transpose() - x * solve_gram(&k, &rrt)
}

/// `Σ_i s(a_i, b_i; X) = AᵀR − X K⁻¹ RᵀR`.
pub fn score_sum(data: &EivDataset, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    data.check_x(x)?;
    let r = data.residuals(x);
    Ok(score_sum_from_residuals(data, x, &r))
}

pub(crate) fn score_sum_from_residuals(
    data: &EivDataset,
    x: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = gram_plus_identity(x);
    let rtr = r.transpose() * r;
    data.a().transpose() * r - x * solve_gram(&k, &rtr)
}

/// Analytic gradient `∂Q/∂X`.
///
/// With `R = AX − B` and `K = I + XᵀX`:
/// `∂Q/∂X = 2·(AᵀR K⁻¹ − X K⁻¹ RᵀR K⁻¹) = 2·score_sum(X)·K⁻¹`.
pub fn loss_gradient(data: &EivDataset, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = score_sum(data, x)?;
    let k = gram_plus_identity(x);
    // s K⁻¹ = (K⁻¹ sᵀ)ᵀ
    Ok(solve_gram(&k, &s.transpose()).transpose() * 2.0)
}

/// TLS estimate from the SVD of `C = [A B]`.
///
/// With `V₂` the right singular vectors of the `d` smallest singular values,
/// partitioned into the top `n×d` block `V₂₁` and bottom `d×d` block `V₂₂`,
/// the estimate is `X̂ = −V₂₁ V₂₂⁻¹`.
pub fn tls_estimate(data: &EivDataset) -> Result<TlsFit> {
    let (m, n, d) = (data.m(), data.n(), data.d());
    let p = n + d;

    // Zero rows leave CᵀC unchanged and give the SVD a full set of right
    // singular vectors when m < n + d.
    let c = if m >= p {
        data.augmented()
    } else {
        let mut c = DMatrix::zeros(p, p);
        c.rows_mut(0, m).copy_from(&data.augmented());
        c
    };

    let svd = c.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let gap = sv[n - 1] - sv[n];
    let threshold = GAP_REL_TOL * sv[0];
    if !(gap > threshold) {
        return Err(Error::DegenerateInput { gap, threshold });
    }

    // columns of V₂ are rows of Vᵀ for the d smallest singular values
    let v2 = DMatrix::from_fn(p, d, |row, col| v_t[(order[n + col], row)]);
    let v21 = v2.rows(0, n).into_owned();
    let v22 = v2.rows(n, d).into_owned();

    let v22_sv = v22.clone().singular_values();
    let smax = v22_sv.max();
    let smin = v22_sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= V22_COND_MAX) {
        return Err(Error::NoFiniteSolution { cond });
    }

    // X̂ V₂₂ = −V₂₁  ⇔  V₂₂ᵀ X̂ᵀ = −V₂₁ᵀ
    let x_hat_t = v22
        .transpose()
        .lu()
        .solve(&(-v21.transpose()))
        .ok_or(Error::NoFiniteSolution { cond })?;
    let x_hat = x_hat_t.transpose();

    let r = data.residuals(&x_hat);
    let k = gram_plus_identity(&x_hat);
    let loss = solve_gram(&k, &(r.transpose() * &r)).trace().max(0.0);
    let score = score_sum_from_residuals(data, &x_hat, &r);
    let score_residual = score.norm() / (1.0 + data.cross_moment().norm());

    Ok(TlsFit {
        x_hat,
        singular_values: sv,
        singular_gap: gap,
        loss_at_solution: loss,
        score_residual,
    })
}
