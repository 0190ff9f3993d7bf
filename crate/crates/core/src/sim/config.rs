use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, DEFAULT_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Rows drawn once from `N(μ_a, S_a)` and frozen across replicates.
    FrozenGaussian,
    /// `μ_a + L·√12·(h_i − ½)` with `h_i` the Halton point in the first
    /// `n` prime bases and `L Lᵀ = S_a`.
    Lattice,
}

/// Nonrandom design `A⁰` whose averages converge to `μ_a` and whose
/// centered second moment converges to `S_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub mu_a: DVector<f64>,
    pub s_a: SymMatrix,
    pub design_seed: u64,
}

impl DesignSpec {
    pub fn n(&self) -> usize {
        self.mu_a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::Dimension("design needs n >= 1".into()));
        }
        if self.s_a.dim() != self.n() {
            return Err(Error::Dimension(format!(
                "s_a is {0}x{0} but mu_a has length {1}",
                self.s_a.dim(),
                self.n()
            )));
        }
        if self.mu_a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("mu_a has non-finite entries".into()));
        }
        self.s_a.check_pd(DEFAULT_REL_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorLaw {
    Normal,
    /// Uniform on `[−σ√3, σ√3]`.
    UniformSymmetric,
}

/// i.i.d. error coordinates with mean 0 and variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSpec {
    pub law: ErrorLaw,
    pub sigma: f64,
}

impl ErrorSpec {
    /// `σ = 0` is accepted and produces exact data.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Fourth central moment of one coordinate.
    pub fn fourth_moment(&self) -> f64 {
        let s4 = self.variance().powi(2);
        match self.law {
            ErrorLaw::Normal => 3.0 * s4,
            ErrorLaw::UniformSymmetric => 1.8 * s4,
        }
    }
}

/// Perturbation `g` of the regression function in
/// `b_i = X⁰ᵀa_i⁰ + g(a_i⁰)/√m + b̃_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalAlternativeSpec {
    /// `g(a) = c`.
    Constant { c: DVector<f64> },
    /// `g(a) = v·(aᵀQa)`.
    Quadratic { v: DVector<f64>, q: SymMatrix },
}

impl LocalAlternativeSpec {
    pub fn d(&self) -> usize {
        match self {
            LocalAlternativeSpec::Constant { c } => c.len(),
            LocalAlternativeSpec::Quadratic { v, .. } => v.len(),
        }
    }

    pub fn eval(&self, a: &[f64]) -> DVector<f64> {
        match self {
            LocalAlternativeSpec::Constant { c } => c.clone(),
            LocalAlternativeSpec::Quadratic { v, q } => {
                let a = DVector::from_column_slice(a);
                v * q.quad_form(&a)
            }
        }
    }

    /// `g ↦ k·g`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            LocalAlternativeSpec::Constant { c } => LocalAlternativeSpec::Constant { c: c * k },
            LocalAlternativeSpec::Quadratic { v, q } => LocalAlternativeSpec::Quadratic {
                v: v * k,
                q: q.clone(),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LocalAlternativeSpec::Constant { c } => c.iter().all(|&x| x == 0.0),
            LocalAlternativeSpec::Quadratic { v, q } => {
                v.iter().all(|&x| x == 0.0) || q.matrix().iter().all(|&x| x == 0.0)
            }
        }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.d() != d {
            return Err(Error::Dimension(format!(
                "perturbation has {} outputs, model has d = {d}",
                self.d()
            )));
        }
        if let LocalAlternativeSpec::Quadratic { q, .. } = self {
            if q.dim() != n {
                return Err(Error::Dimension(format!("quadratic form must be {n}x{n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: DesignSpec,
    pub errors: ErrorSpec,
    pub x0: DMatrix<f64>,
    pub m: usize,
    pub reps: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub alternative: Option<LocalAlternativeSpec>,
}

impl SimConfig {
    pub fn n(&self) -> usize {
        self.x0.nrows()
    }

    pub fn d(&self) -> usize {
        self.x0.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.errors.validate()?;
        if self.x0.nrows() != self.design.n() || self.d() == 0 {
            return Err(Error::Dimension(format!(
                "x0 is {}x{} but the design has n = {}",
                self.x0.nrows(),
                self.x0.ncols(),
                self.design.n()
            )));
        }
        if self.m < self.n() + self.d() {
            return Err(Error::Domain(format!(
                "m = {} must be at least n + d = {}",
                self.m,
                self.n() + self.d()
            )));
        }
        if self.reps < 1 {
            return Err(Error::Domain("reps must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1/2), got {}", self.alpha)));
        }
        if let Some(alt) = &self.alternative {
            alt.validate(self.n(), self.d())?;
        }
        Ok(())
    }

    pub fn with_m(&self, m: usize) -> Self {
        SimConfig { m, ..self.clone() }
    }

    pub fn with_alternative(&self, alternative: Option<LocalAlternativeSpec>) -> Self {
        SimConfig {
            alternative,
            ..self.clone()
        }
    }
}
