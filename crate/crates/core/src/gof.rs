//! The goodness-of-fit test on the studentized mean TLS residual.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::distributions::{chi2_sf, chi2_upper_quantile};
use crate::error::{Error, Result, Stage};
use crate::nuisance::{estimate_sigma_t, NuisanceEstimates, TestCovariance};
use crate::tls::{tls_estimate, EivDataset, TlsFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    /// `T_m⁰`, the mean residual `mean(b_i − X̂ᵀa_i)`.
    #[serde(with = "crate::serde_mat::vector")]
    pub t0: DVector<f64>,
    /// `T_m² = m·T_m⁰ᵀ Σ̂_T⁻¹ T_m⁰`.
    pub t2: f64,
    pub df: u32,
    pub p_value: f64,
    pub alpha: f64,
    /// Upper `α`-quantile of χ²_d.
    pub quantile: f64,
    pub decision: Decision,
    pub m: usize,
    pub covariance: TestCovariance,
    pub fit: TlsFit,
    pub nuisance: NuisanceEstimates,
}

/// `T_m⁰ = (1/m) Σ (b_i − X̂ᵀa_i)`.
pub fn compute_t0(data: &EivDataset, x_hat: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_hat.nrows() != data.n() || x_hat.ncols() != data.d() {
        return Err(Error::Dimension(format!("x_hat must be {}x{}", data.n(), data.d())));
    }
    Ok((data.b() - data.a() * x_hat).row_mean().transpose())
}

/// `m·t0ᵀ Σ̂_T⁻¹ t0`, via a Cholesky solve.
pub fn test_statistic(t0: &DVector<f64>, sigma_t: &TestCovariance, m: usize) -> Result<f64> {
    if t0.len() != sigma_t.sigma_t_hat.dim() {
        return Err(Error::Dimension("t0 and Σ̂_T dimensions differ".into()));
    }
    if !sigma_t.pd_ok {
        let (min, max) = sigma_t.sigma_t_hat.eigen_range();
        return Err(Error::CovarianceNotPd { min, max });
    }
    let rhs = DMatrix::from_column_slice(t0.len(), 1, t0.as_slice());
    let z = sigma_t
        .sigma_t_hat
        .cholesky_solve(&rhs)
        .map_err(|_| {
            let (min, max) = sigma_t.sigma_t_hat.eigen_range();
            Error::CovarianceNotPd { min, max }
        })?;
    Ok((m as f64 * t0.dot(&z.column(0))).max(0.0))
}

/// Fits, estimates nuisance parameters and runs the test at level `alpha`.
///
/// Accepts iff `T_m² <= χ²_{d,α}`.
pub fn run_test(data: &EivDataset, alpha: f64) -> Result<GofReport> {
    let d = data.d() as u32;
    let quantile = chi2_upper_quantile(alpha, d)?;

    let fit = tls_estimate(data).map_err(|e| e.at(Stage::Estimate))?;
    let nuisance = NuisanceEstimates::estimate(data, &fit.x_hat).map_err(|e| e.at(Stage::Nuisance))?;
    let covariance = estimate_sigma_t(data, &fit, &nuisance).map_err(|e| e.at(Stage::Covariance))?;
    let t0 = compute_t0(data, &fit.x_hat).map_err(|e| e.at(Stage::Statistic))?;
    let t2 = test_statistic(&t0, &covariance, data.m()).map_err(|e| e.at(Stage::Statistic))?;
    let p_value = chi2_sf(t2, d)?;
    let decision = if t2 > quantile {
        Decision::Reject
    } else {
        Decision::Accept
    };

    Ok(GofReport {
        t0,
        t2,
        df: d,
        p_value,
        alpha,
        quantile,
        decision,
        m: data.m(),
        covariance,
        fit,
        nuisance,
    })
}
