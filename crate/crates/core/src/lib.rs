//! Total least squares for the multivariate errors-in-variables model
//! `A X ≈ B`, and a goodness-of-fit test built on the mean TLS residual.
//!
//! The pipeline is:
//!
//! 1. [`tls::tls_estimate`] computes `X̂` from the SVD of `[A B]`;
//! 2. [`nuisance`] estimates the error variance, the design second-moment
//!    matrix and the sandwich covariance of the residual mean;
//! 3. [`gof::run_test`] studentizes the mean residual and compares it with
//!    the upper quantile of the central χ² law with `d` degrees of freedom.
//!
//! [`sim`] generates data under the null model and under local alternatives
//! and runs Monte Carlo level, power and asymptotic-expansion studies.

pub mod distributions;
pub mod error;
pub mod gof;
pub mod linalg;
pub mod nuisance;
pub mod serde_mat;
pub mod sim;
pub mod tls;

pub use distributions::{chi2_sf, chi2_upper_quantile, noncentral_chi2_sf, Chi2Spec};
pub use error::{Error, Result, Stage};
pub use gof::{compute_t0, run_test, test_statistic, Decision, GofReport};
pub use linalg::{sym_inv_sqrt, SymMatrix, DEFAULT_REL_TOL};
pub use nuisance::{
    estimate_mu_a, estimate_sigma2, estimate_sigma_t, estimate_va, sandwich, NuisanceEstimates,
    TestCovariance,
};
pub use tls::{loss_q, loss_total, score_s, score_sum, tls_estimate, EivDataset, TlsFit};

pub use nalgebra::{DMatrix, DVector};
