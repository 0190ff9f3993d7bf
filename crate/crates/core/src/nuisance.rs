//! Nuisance-parameter estimators: error variance, design moments, and the
//! sandwich covariance of the mean TLS residual.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, DEFAULT_REL_TOL};
use crate::tls::{gram_plus_identity, solve_gram, EivDataset, TlsFit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceEstimates {
    /// `σ̂²`, clamped at zero.
    pub sigma2_hat: f64,
    /// `V̂_A = mean(aaᵀ) − σ̂² I_n`.
    pub va_hat: SymMatrix,
    /// `μ̂_a = mean(a)`.
    #[serde(with = "crate::serde_mat::vector")]
    pub mu_a_hat: DVector<f64>,
    /// Smallest eigenvalue of `V̂_A − μ̂_a μ̂_aᵀ`, the plug-in for the centered
    /// design covariance. Diagnostic only.
    pub sa_min_eigenvalue: f64,
}

impl NuisanceEstimates {
    pub fn estimate(data: &EivDataset, x_hat: &DMatrix<f64>) -> Result<Self> {
        let sigma2_hat = estimate_sigma2(data, x_hat)?;
        let va_hat = estimate_va(data, sigma2_hat);
        let mu_a_hat = estimate_mu_a(data);
        let centered = SymMatrix::symmetrize(va_hat.matrix() - &mu_a_hat * mu_a_hat.transpose());
        let (sa_min_eigenvalue, _) = centered.eigen_range();
        Ok(NuisanceEstimates {
            sigma2_hat,
            va_hat,
            mu_a_hat,
            sa_min_eigenvalue,
        })
    }
}

/// Estimated covariance of `√m·T_m⁰`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestCovariance {
    /// `Σ̂_T = σ̂²(1 − 2μ̂ᵀV̂_A⁻¹μ̂)(I_d + X̂ᵀX̂) + Ŝ(μ̂)`.
    pub sigma_t_hat: SymMatrix,
    /// `Ŝ(μ̂)`.
    pub sandwich_part: SymMatrix,
    /// `1 − 2μ̂ᵀV̂_A⁻¹μ̂`; may be negative in small samples.
    pub leading_scalar: f64,
    pub pd_ok: bool,
}

fn mean_outer(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    (x.transpose() * y) / x.nrows() as f64
}

/// Trace form of the variance estimator:
/// `σ̂² = (1/d)·tr[(mean(bbᵀ) − 2X̂ᵀmean(abᵀ) + X̂ᵀmean(aaᵀ)X̂)(I_d + X̂ᵀX̂)⁻¹]`,
/// clamped at zero.
pub fn estimate_sigma2(data: &EivDataset, x_hat: &DMatrix<f64>) -> Result<f64> {
    if x_hat.nrows() != data.n() || x_hat.ncols() != data.d() {
        return Err(Error::Dimension(format!(
            "x_hat must be {}x{}",
            data.n(),
            data.d()
        )));
    }
    let (a, b) = (data.a(), data.b());
    let m_bb = mean_outer(b, b);
    let m_ab = mean_outer(a, b);
    let m_aa = mean_outer(a, a);
    let inner = m_bb - x_hat.transpose() * &m_ab * 2.0 + x_hat.transpose() * m_aa * x_hat;
    let k = gram_plus_identity(x_hat);
    // tr(N K⁻¹) = tr(K⁻¹ N)
    let value = solve_gram(&k, &inner).trace() / data.d() as f64;
    Ok(value.max(0.0))
}

/// `V̂_A = mean(aaᵀ) − σ̂² I_n`, symmetrized. May be indefinite.
pub fn estimate_va(data: &EivDataset, sigma2_hat: f64) -> SymMatrix {
    let n = data.n();
    let m_aa = mean_outer(data.a(), data.a());
    SymMatrix::symmetrize(m_aa - DMatrix::identity(n, n) * sigma2_hat)
}

/// Column mean of `A`.
pub fn estimate_mu_a(data: &EivDataset) -> DVector<f64> {
    data.a().row_mean().transpose()
}

/// Sandwich estimator
/// `Ŝ(f̂) = (1/m) Σ sᵀ(a_i, b_i; X̂) V̂_A⁻¹ f̂ f̂ᵀ V̂_A⁻¹ s(a_i, b_i; X̂)`.
///
/// With `u = V̂_A⁻¹f̂`, `w = K⁻¹X̂ᵀu` and `r_i = X̂ᵀa_i − b_i`, each
/// `s_iᵀu = r_i·(a_iᵀu − r_iᵀw)`, so the sum collapses to
/// `(1/m) Rᵀ diag(p²) R` with `p_i = a_iᵀu − r_iᵀw`.
pub fn sandwich(
    data: &EivDataset,
    x_hat: &DMatrix<f64>,
    va_hat: &SymMatrix,
    f_hat: &DVector<f64>,
) -> Result<SymMatrix> {
    let (m, n, d) = (data.m(), data.n(), data.d());
    if va_hat.dim() != n || f_hat.len() != n || x_hat.nrows() != n || x_hat.ncols() != d {
        return Err(Error::Dimension("sandwich inputs have inconsistent dimensions".into()));
    }
    let u = va_hat.pd_solve_vec(f_hat, DEFAULT_REL_TOL)?;
    let k = gram_plus_identity(x_hat);
    let xtu = DMatrix::from_column_slice(d, 1, (x_hat.transpose() * &u).as_slice());
    let w = solve_gram(&k, &xtu).column(0).into_owned();

    let r = data.residuals(x_hat);
    let p = data.a() * &u - &r * &w;
    let mut weighted = r.clone();
    for (mut row, pi) in weighted.row_iter_mut().zip(p.iter()) {
        row *= pi * pi;
    }
    let s = r.transpose() * weighted / m as f64;
    Ok(SymMatrix::symmetrize(s))
}

/// Assembles `Σ̂_T` and flags whether it is usable as a covariance.
///
/// `pd_ok` requires `λ_min > rel_tol·λ_max` and, in addition,
/// `λ_min > rel_tol·scale` where `scale` is the mean squared row norm of
/// `[A B]`; the second condition catches matrices that are PD only through
/// roundoff on noise-free data.
pub fn estimate_sigma_t(
    data: &EivDataset,
    fit: &TlsFit,
    nuis: &NuisanceEstimates,
) -> Result<TestCovariance> {
    let x_hat = &fit.x_hat;
    let mu = &nuis.mu_a_hat;
    let v_inv_mu = nuis.va_hat.pd_solve_vec(mu, DEFAULT_REL_TOL)?;
    let leading_scalar = 1.0 - 2.0 * mu.dot(&v_inv_mu);
    let sandwich_part = sandwich(data, x_hat, &nuis.va_hat, mu)?;
    let k = gram_plus_identity(x_hat);
    let sigma_t_hat = k
        .scale(nuis.sigma2_hat * leading_scalar)
        .add(&sandwich_part)?;

    let scale = (data.a().norm_squared() + data.b().norm_squared()) / data.m() as f64;
    let (min, max) = sigma_t_hat.eigen_range();
    let pd_ok = max > 0.0 && min > DEFAULT_REL_TOL * max && min > DEFAULT_REL_TOL * scale;
    Ok(TestCovariance {
        sigma_t_hat,
        sandwich_part,
        leading_scalar,
        pd_ok,
    })
}
