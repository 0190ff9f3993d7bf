//! TOML schema for `simulate`, mirrored onto [`eivgof::sim::SimConfig`].

use eivgof::sim::{DesignKind, DesignSpec, ErrorLaw, ErrorSpec, LocalAlternativeSpec, SimConfig};
use eivgof::{DMatrix, DVector, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub m: usize,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub master_seed: u64,
    /// Row-major `n×d`.
    pub x0: Vec<Vec<f64>>,
    pub design: DesignSection,
    pub errors: ErrorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AlternativeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltSection>,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKindName {
    FrozenGaussian,
    Lattice,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub kind: DesignKindName,
    pub n: usize,
    pub mu_a: Vec<f64>,
    pub s_a: Vec<Vec<f64>>,
    pub design_seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLawName {
    Normal,
    UniformSymmetric,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSection {
    pub law: ErrorLawName,
    pub sigma: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlternativeSection {
    Constant { c: Vec<f64> },
    Quadratic { v: Vec<f64>, q: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub m_values: Vec<usize>,
}

pub const DEFAULT_CLT_M_VALUES: [usize; 3] = [500, 2000, 8000];

fn matrix(key: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, Failure> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Failure::usage(format!("{key}: expected a {nrows}x{ncols} array of arrays")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector(key: &str, v: &[f64], len: usize) -> Result<DVector<f64>, Failure> {
    if v.len() != len {
        return Err(Failure::usage(format!("{key}: expected {len} entries, found {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

fn symmetric(key: &str, rows: &[Vec<f64>], n: usize) -> Result<SymMatrix, Failure> {
    let m = matrix(key, rows, n, n)?;
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Failure::usage(format!("{key}: matrix must be symmetric")));
    }
    SymMatrix::new(m).map_err(|e| Failure::usage(format!("{key}: {e}")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::usage(format!("config: {e}")))
    }

    pub fn to_sim_config(&self) -> Result<SimConfig, Failure> {
        let n = self.design.n;
        if n == 0 {
            return Err(Failure::usage("design.n: must be >= 1"));
        }
        let d = self.x0.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Failure::usage("x0: must have at least one column"));
        }
        let x0 = matrix("x0", &self.x0, n, d)?;
        let design = DesignSpec {
            kind: match self.design.kind {
                DesignKindName::FrozenGaussian => DesignKind::FrozenGaussian,
                DesignKindName::Lattice => DesignKind::Lattice,
            },
            mu_a: vector("design.mu_a", &self.design.mu_a, n)?,
            s_a: symmetric("design.s_a", &self.design.s_a, n)?,
            design_seed: self.design.design_seed,
        };
        let errors = ErrorSpec {
            law: match self.errors.law {
                ErrorLawName::Normal => ErrorLaw::Normal,
                ErrorLawName::UniformSymmetric => ErrorLaw::UniformSymmetric,
            },
            sigma: self.errors.sigma,
        };
        let alternative = match &self.alternative {
            None => None,
            Some(AlternativeSection::Constant { c }) => Some(LocalAlternativeSpec::Constant {
                c: vector("alternative.c", c, d)?,
            }),
            Some(AlternativeSection::Quadratic { v, q }) => Some(LocalAlternativeSpec::Quadratic {
                v: vector("alternative.v", v, d)?,
                q: symmetric("alternative.q", q, n)?,
            }),
        };
        let config = SimConfig {
            design,
            errors,
            x0,
            m: self.m,
            reps: self.reps,
            alpha: self.alpha,
            master_seed: self.master_seed,
            alternative,
        };
        config
            .validate()
            .map_err(|e| Failure::usage(format!("config: {e}")))?;
        Ok(config)
    }

    pub fn clt_m_values(&self) -> Vec<usize> {
        self.clt
            .as_ref()
            .map_or_else(|| DEFAULT_CLT_M_VALUES.to_vec(), |c| c.m_values.clone())
    }
}
