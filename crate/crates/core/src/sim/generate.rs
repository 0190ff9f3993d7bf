use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::config::{DesignKind, DesignSpec, ErrorLaw, ErrorSpec, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_REL_TOL;
use crate::tls::EivDataset;

/// Stream reserved for the design draw; replicate streams are `0..reps`.
const DESIGN_STREAM: u64 = u64::MAX;

/// Error stream for replicate `rep` under `master_seed`.
pub fn replicate_rng(master_seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(rep);
    rng
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// `m×n` design matrix `A⁰`; a deterministic function of `(spec, m)`.
///
/// Rows are generated sequentially, so the design for a smaller `m` is a
/// prefix of the design for a larger one.
pub fn generate_design(spec: &DesignSpec, m: usize) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if m < 1 {
        return Err(Error::Domain("design needs m >= 1".into()));
    }
    let n = spec.n();
    let l = spec.s_a.cholesky_factor(DEFAULT_REL_TOL)?;
    let mut z = vec![0.0; n];
    let mut a0 = DMatrix::zeros(m, n);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.design_seed);
    rng.set_stream(DESIGN_STREAM);
    if spec.kind == DesignKind::Lattice && n > PRIMES.len() {
        return Err(Error::Domain(format!("lattice design supports n <= {}", PRIMES.len())));
    }

    for i in 0..m {
        match spec.kind {
            DesignKind::FrozenGaussian => {
                for zj in z.iter_mut() {
                    *zj = rng.sample(StandardNormal);
                }
            }
            DesignKind::Lattice => {
                for (zj, &p) in z.iter_mut().zip(PRIMES.iter()) {
                    *zj = 12f64.sqrt() * (radical_inverse(i as u64 + 1, p) - 0.5);
                }
            }
        }
        for j in 0..n {
            let mut v = spec.mu_a[j];
            for (k, zk) in z.iter().enumerate().take(j + 1) {
                v += l[(j, k)] * zk;
            }
            a0[(i, j)] = v;
        }
    }
    Ok(a0)
}

/// `m×p` matrix of i.i.d. errors, drawn row by row.
fn draw_errors(errors: &ErrorSpec, rng: &mut ChaCha8Rng, m: usize, p: usize) -> DMatrix<f64> {
    let sigma = errors.sigma;
    let mut out = DMatrix::zeros(m, p);
    match errors.law {
        ErrorLaw::Normal => {
            for i in 0..m {
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    out[(i, j)] = sigma * z;
                }
            }
        }
        ErrorLaw::UniformSymmetric => {
            let unit = Uniform::new_inclusive(-1.0, 1.0).expect("finite bounds");
            let h = sigma * 3f64.sqrt();
            for i in 0..m {
                for j in 0..p {
                    out[(i, j)] = h * unit.sample(rng);
                }
            }
        }
    }
    out
}

/// A prepared study: the frozen design, the noiseless responses, and the
/// local-alternative shift `G⁰/√m` when one is configured.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    a0: DMatrix<f64>,
    b0: DMatrix<f64>,
    shift: Option<DMatrix<f64>>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let a0 = generate_design(&config.design, config.m)?;
        let b0 = &a0 * &config.x0;
        let shift = config.alternative.as_ref().map(|alt| {
            let scale = 1.0 / (config.m as f64).sqrt();
            let mut g = DMatrix::zeros(config.m, config.d());
            for i in 0..config.m {
                let row: Vec<f64> = a0.row(i).iter().copied().collect();
                let gi = alt.eval(&row);
                for j in 0..config.d() {
                    g[(i, j)] = gi[j] * scale;
                }
            }
            g
        });
        Ok(Simulation {
            config: config.clone(),
            a0,
            b0,
            shift,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// `A⁰`.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.a0
    }

    /// `G⁰/√m`, the rows `g(a_i⁰)/√m`.
    pub fn shift(&self) -> Option<&DMatrix<f64>> {
        self.shift.as_ref()
    }

    fn noisy(&self, rep: u64, b_clean: &DMatrix<f64>) -> EivDataset {
        let (m, n, d) = (self.config.m, self.config.n(), self.config.d());
        let mut rng = replicate_rng(self.config.master_seed, rep);
        let e = draw_errors(&self.config.errors, &mut rng, m, n + d);
        let a = &self.a0 + e.columns(0, n);
        let b = b_clean + e.columns(n, d);
        EivDataset::new(a, b).expect("generated data is finite and well-shaped")
    }

    /// `A = A⁰ + Ã`, `B = A⁰X⁰ + B̃`.
    pub fn h0(&self, rep: u64) -> EivDataset {
        self.noisy(rep, &self.b0)
    }

    /// As [`Simulation::h0`] with `g(a_i⁰)/√m` added to each noiseless
    /// response; uses the same error stream as `h0(rep)`.
    pub fn h1m(&self, rep: u64) -> Result<EivDataset> {
        let shift = self.shift.as_ref().ok_or(Error::MissingAlternative)?;
        Ok(self.noisy(rep, &(&self.b0 + shift)))
    }

    /// `h1m` when an alternative is configured, otherwise `h0`.
    pub fn replicate(&self, rep: u64) -> EivDataset {
        match &self.shift {
            Some(shift) => self.noisy(rep, &(&self.b0 + shift)),
            None => self.h0(rep),
        }
    }
}

pub fn generate_h0(config: &SimConfig, rep_index: u64) -> Result<EivDataset> {
    Ok(Simulation::new(config)?.h0(rep_index))
}

pub fn generate_h1m(config: &SimConfig, rep_index: u64) -> Result<EivDataset> {
    if config.alternative.is_none() {
        return Err(Error::MissingAlternative);
    }
    Simulation::new(config)?.h1m(rep_index)
}
