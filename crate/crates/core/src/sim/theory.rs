//! Population quantities for a known design and error law: `V_A`, `Σ_T`,
//! the local-alternative drift `C_T`, and the noncentrality `τ`.

use nalgebra::{DMatrix, DVector};

use super::config::{DesignSpec, ErrorSpec, LocalAlternativeSpec};
use crate::error::{Error, Result};
use crate::linalg::{sym_inv_sqrt, SymMatrix, DEFAULT_REL_TOL};
use crate::tls::{gram_plus_identity, solve_gram};

/// `V_A = S_a + μ_a μ_aᵀ`.
pub fn population_va(design: &DesignSpec) -> SymMatrix {
    let mu = &design.mu_a;
    SymMatrix::symmetrize(design.s_a.matrix() + mu * mu.transpose())
}

/// `Σ_T = σ²(1 − 2μᵀV⁻¹μ)K + S(X⁰, μ_a)` for errors with independent
/// coordinates, `K = I_d + X⁰ᵀX⁰`.
///
/// With `u = V⁻¹μ`, `w = K⁻¹X⁰ᵀu`, `ℓ = (u − X⁰w, w)` and `L = [X⁰ᵀ, −I_d]`,
/// the per-row score projection is `sᵀu = r·(a⁰ᵀu + ℓᵀc̃)` where
/// `r = Lc̃`. Since `Lℓ = 0` and third moments vanish,
/// `S = σ²(uᵀVu)K + σ⁴‖ℓ‖²K + (μ₄ − 3σ⁴)·L diag(ℓ²) Lᵀ`.
pub fn population_sigma_t(
    design: &DesignSpec,
    x0: &DMatrix<f64>,
    errors: &ErrorSpec,
) -> Result<SymMatrix> {
    design.validate()?;
    let (n, d) = (x0.nrows(), x0.ncols());
    if n != design.n() {
        return Err(Error::Dimension("x0 rows must match the design dimension".into()));
    }
    let va = population_va(design);
    let mu = &design.mu_a;
    let u = va.pd_solve_vec(mu, DEFAULT_REL_TOL)?;
    let k = gram_plus_identity(x0);
    let xtu = DMatrix::from_column_slice(d, 1, (x0.transpose() * &u).as_slice());
    let w = solve_gram(&k, &xtu).column(0).into_owned();

    let mut ell = DVector::zeros(n + d);
    ell.rows_mut(0, n).copy_from(&(&u - x0 * &w));
    ell.rows_mut(n, d).copy_from(&w);

    let mut l = DMatrix::zeros(d, n + d);
    l.columns_mut(0, n).copy_from(&x0.transpose());
    l.columns_mut(n, d).copy_from(&(-DMatrix::<f64>::identity(d, d)));

    let s2 = errors.variance();
    let excess = errors.fourth_moment() - 3.0 * s2 * s2;
    let ell_sq = DMatrix::from_diagonal(&ell.map(|v| v * v));

    let km = k.matrix();
    let sandwich = km * (s2 * va.quad_form(&u) + s2 * s2 * ell.norm_squared())
        + &l * ell_sq * l.transpose() * excess;
    let sigma_t = km * (s2 * (1.0 - 2.0 * mu.dot(&u))) + sandwich;
    Ok(SymMatrix::symmetrize(sigma_t))
}

/// Drift `C_T = E[g(a⁰)] − E[g(a⁰)a⁰ᵀ]V_A⁻¹μ_a`, with `u = V_A⁻¹μ_a`.
///
/// Both design kinds are symmetric about `μ_a`, so third central moments
/// vanish and `E[(aᵀQa)a] = (tr(QS) + μᵀQμ)μ + 2SQμ`. Hence
/// `Constant(c)` gives `c(1 − μᵀu)` and `Quadratic(v, Q)` gives
/// `v[(tr(QS) + μᵀQμ)(1 − μᵀu) − 2μᵀQSu]`.
pub fn c_t(design: &DesignSpec, alt: &LocalAlternativeSpec) -> Result<DVector<f64>> {
    design.validate()?;
    alt.validate(design.n(), alt.d())?;
    let va = population_va(design);
    let mu = &design.mu_a;
    let u = va.pd_solve_vec(mu, DEFAULT_REL_TOL)?;
    let p = mu.dot(&u);

    match alt {
        LocalAlternativeSpec::Constant { c } => Ok(c * (1.0 - p)),
        LocalAlternativeSpec::Quadratic { v, q } => {
            let level = (q.matrix() * design.s_a.matrix()).trace() + q.quad_form(mu);
            let cross = (q.matrix() * mu).dot(&(design.s_a.matrix() * &u));
            Ok(v * (level * (1.0 - p) - 2.0 * cross))
        }
    }
}

/// `τ = ‖Σ_T^{-1/2} C_T‖`.
pub fn theoretical_tau(
    design: &DesignSpec,
    alt: &LocalAlternativeSpec,
    sigma_t: &SymMatrix,
) -> Result<f64> {
    if sigma_t.dim() != alt.d() {
        return Err(Error::Dimension("Σ_T and the perturbation disagree on d".into()));
    }
    if alt.is_zero() {
        return Ok(0.0);
    }
    let drift = c_t(design, alt)?;
    let root = sym_inv_sqrt(sigma_t, DEFAULT_REL_TOL)?;
    Ok((root.matrix() * drift).norm())
}
