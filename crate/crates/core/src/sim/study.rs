//! Monte Carlo level, power and asymptotic-expansion studies.
//!
//! Replicates run on the current rayon pool; results are collected in
//! replicate order and reduced sequentially, so every report is a pure
//! function of the configuration.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{LocalAlternativeSpec, SimConfig};
use super::generate::Simulation;
use super::theory::{population_sigma_t, theoretical_tau};
use crate::distributions::{chi2_sf, chi2_upper_quantile, noncentral_chi2_sf};
use crate::error::{Error, Result};
use crate::gof::{run_test, Decision};
use crate::linalg::SymMatrix;
use crate::nuisance::{sandwich, NuisanceEstimates};
use crate::tls::{score_sum, tls_estimate};

/// Per-replicate failure counts, by root cause.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FailureTally {
    pub no_finite_solution: usize,
    pub degenerate_input: usize,
    pub covariance_not_pd: usize,
    pub not_positive_definite: usize,
    pub other: usize,
}

impl FailureTally {
    fn record(&mut self, e: &Error) {
        match e.root() {
            Error::NoFiniteSolution { .. } => self.no_finite_solution += 1,
            Error::DegenerateInput { .. } => self.degenerate_input += 1,
            Error::CovarianceNotPd { .. } => self.covariance_not_pd += 1,
            Error::NotPositiveDefinite { .. } => self.not_positive_definite += 1,
            _ => self.other += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.no_finite_solution
            + self.degenerate_input
            + self.covariance_not_pd
            + self.not_positive_definite
            + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub rep: u64,
    pub t2: Option<f64>,
    pub p_value: Option<f64>,
    pub rejected: Option<bool>,
    pub score_residual: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelReport {
    pub reps: usize,
    pub valid_runs: usize,
    pub failed_runs: usize,
    pub failures: FailureTally,
    pub rejections: usize,
    /// Rejections over valid runs; failed replicates are excluded.
    pub reject_rate: f64,
    pub alpha: f64,
    pub df: u32,
    pub quantile: f64,
    /// Kolmogorov–Smirnov distance between the T² samples and χ²_d.
    pub ks_distance: f64,
    /// Largest relative score-equation residual over the valid runs.
    pub max_score_residual: f64,
    #[serde(skip)]
    pub replicates: Vec<ReplicateRecord>,
}

impl LevelReport {
    /// T² of the successful replicates, in replicate order.
    pub fn t2_samples(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.t2).collect()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.replicates.iter().filter_map(|r| r.p_value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    #[serde(flatten)]
    pub empirical: LevelReport,
    pub tau_theoretical: f64,
    /// `P(χ²_d(τ) > χ²_{d,α})`.
    pub power_theoretical: f64,
    /// Population `Σ_T` used for `τ`.
    pub sigma_t_population: SymMatrix,
}

impl PowerReport {
    pub fn reject_rate(&self) -> f64 {
        self.empirical.reject_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub scales: Vec<f64>,
    pub points: Vec<PowerReport>,
    /// Empirical rejection rate strictly increasing along `scales`.
    pub empirical_increasing: bool,
    /// Theoretical power nondecreasing along `scales`.
    pub theoretical_nondecreasing: bool,
}

/// Kolmogorov–Smirnov distance `sup |F_n − F|`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

fn run_replicates(sim: &Simulation) -> Result<LevelReport> {
    let config = sim.config();
    let d = config.d() as u32;
    let quantile = chi2_upper_quantile(config.alpha, d)?;

    let outcomes: Vec<(ReplicateRecord, Option<Error>)> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = sim.replicate(rep);
            match run_test(&data, config.alpha) {
                Ok(report) => (
                    ReplicateRecord {
                        rep,
                        t2: Some(report.t2),
                        p_value: Some(report.p_value),
                        rejected: Some(report.decision == Decision::Reject),
                        score_residual: Some(report.fit.score_residual),
                        failure: None,
                    },
                    None,
                ),
                Err(e) => (
                    ReplicateRecord {
                        rep,
                        t2: None,
                        p_value: None,
                        rejected: None,
                        score_residual: None,
                        failure: Some(e.to_string()),
                    },
                    Some(e),
                ),
            }
        })
        .collect();

    let mut failures = FailureTally::default();
    let mut replicates = Vec::with_capacity(outcomes.len());
    for (record, err) in outcomes {
        if let Some(e) = err {
            failures.record(&e);
        }
        replicates.push(record);
    }

    let valid_runs = replicates.iter().filter(|r| r.t2.is_some()).count();
    let rejections = replicates.iter().filter(|r| r.rejected == Some(true)).count();
    let reject_rate = if valid_runs > 0 {
        rejections as f64 / valid_runs as f64
    } else {
        f64::NAN
    };
    let t2: Vec<f64> = replicates.iter().filter_map(|r| r.t2).collect();
    let ks = ks_distance(&t2, |x| 1.0 - chi2_sf(x, d).unwrap_or(0.0));

    Ok(LevelReport {
        reps: config.reps,
        valid_runs,
        failed_runs: config.reps - valid_runs,
        failures,
        rejections,
        reject_rate,
        alpha: config.alpha,
        df: d,
        quantile,
        ks_distance: ks,
        max_score_residual: replicates
            .iter()
            .filter_map(|r| r.score_residual)
            .fold(0.0, f64::max),
        replicates,
    })
}

/// Empirical level under the null model.
pub fn monte_carlo_level(config: &SimConfig) -> Result<LevelReport> {
    let sim = Simulation::new(&config.with_alternative(None))?;
    run_replicates(&sim)
}

/// Empirical rejection rate under the configured local alternative, with
/// the asymptotic power `P(χ²_d(τ) > χ²_{d,α})` from the population `Σ_T`.
pub fn monte_carlo_power(config: &SimConfig) -> Result<PowerReport> {
    let alt = config.alternative.as_ref().ok_or(Error::MissingAlternative)?;
    config.validate()?;
    let sigma_t = population_sigma_t(&config.design, &config.x0, &config.errors)?;
    let tau = theoretical_tau(&config.design, alt, &sigma_t)?;
    let d = config.d() as u32;
    let power = noncentral_chi2_sf(chi2_upper_quantile(config.alpha, d)?, d, tau)?;
    let sim = Simulation::new(config)?;
    Ok(PowerReport {
        empirical: run_replicates(&sim)?,
        tau_theoretical: tau,
        power_theoretical: power,
        sigma_t_population: sigma_t,
    })
}

/// Power at `g` scaled by each entry of `scales`.
pub fn power_curve(config: &SimConfig, scales: &[f64]) -> Result<PowerCurve> {
    let alt: &LocalAlternativeSpec = config.alternative.as_ref().ok_or(Error::MissingAlternative)?;
    let points = scales
        .iter()
        .map(|&k| monte_carlo_power(&config.with_alternative(Some(alt.scaled(k)))))
        .collect::<Result<Vec<_>>>()?;
    let empirical_increasing = points.windows(2).all(|w| w[0].reject_rate() < w[1].reject_rate());
    let theoretical_nondecreasing = points
        .windows(2)
        .all(|w| w[0].power_theoretical <= w[1].power_theoretical);
    Ok(PowerCurve {
        scales: scales.to_vec(),
        points,
        empirical_increasing,
        theoretical_nondecreasing,
    })
}

fn sample_covariance(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let d = rows[0].len();
    let k = rows.len() as f64;
    let mean = rows.iter().fold(DVector::zeros(d), |acc, r| acc + r) / k;
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let c = r - &mean;
        cov += &c * c.transpose();
    }
    cov / (k - 1.0)
}

/// Sampling check of `Σ̂_T` against the spread of `√m·T_m⁰`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub m: usize,
    pub valid_runs: usize,
    #[serde(with = "crate::serde_mat")]
    pub sample_covariance: DMatrix<f64>,
    #[serde(with = "crate::serde_mat")]
    pub mean_sigma_t_hat: DMatrix<f64>,
    /// `‖mean Σ̂_T − cov(√m T⁰)‖_F / ‖cov(√m T⁰)‖_F`.
    pub relative_error: f64,
    pub population_sigma_t: SymMatrix,
}

/// Runs the test on `reps` null replicates and compares the average of
/// `Σ̂_T` with the sample covariance of `√m·T_m⁰`.
pub fn covariance_check(config: &SimConfig) -> Result<CovarianceCheck> {
    let sim = Simulation::new(&config.with_alternative(None))?;
    let m = config.m;
    let root_m = (m as f64).sqrt();
    let results: Vec<Option<(DVector<f64>, DMatrix<f64>)>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = sim.h0(rep);
            run_test(&data, config.alpha)
                .ok()
                .map(|r| (r.t0 * root_m, r.covariance.sigma_t_hat.into_matrix()))
        })
        .collect();
    let ok: Vec<_> = results.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::Domain("fewer than two successful replicates".into()));
    }
    let scaled_t0: Vec<DVector<f64>> = ok.iter().map(|(t, _)| t.clone()).collect();
    let sample = sample_covariance(&scaled_t0);
    let mean_hat = ok.iter().fold(DMatrix::zeros(config.d(), config.d()), |acc, (_, s)| acc + s)
        / ok.len() as f64;
    let relative_error = (&mean_hat - &sample).norm() / sample.norm();
    Ok(CovarianceCheck {
        m,
        valid_runs: ok.len(),
        sample_covariance: sample,
        mean_sigma_t_hat: mean_hat,
        relative_error,
        population_sigma_t: population_sigma_t(&config.design, &config.x0, &config.errors)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderPoint {
    pub m: usize,
    pub valid_runs: usize,
    /// Median over replicates of
    /// `‖√m(X̂ − X⁰) + V⁻¹·(1/√m)Σ s(a_i, b_i; X⁰)‖_F`, with
    /// `V = A⁰ᵀA⁰/m` from the realized design.
    pub median_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub m: usize,
    pub reps: usize,
    pub valid_runs: usize,
    /// Sample covariance of `√m(X̂ − X⁰)ᵀμ_a`.
    #[serde(with = "crate::serde_mat")]
    pub projection_covariance: DMatrix<f64>,
    /// Replicate average of `Ŝ(μ̂_a)`.
    #[serde(with = "crate::serde_mat")]
    pub mean_sandwich: DMatrix<f64>,
    pub sandwich_relative_error: f64,
    pub remainder: Vec<RemainderPoint>,
    /// Median remainder strictly decreasing along `remainder`.
    pub remainder_decreasing: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn remainder_point(config: &SimConfig, m: usize) -> Result<RemainderPoint> {
    let cfg = config.with_m(m).with_alternative(None);
    let sim = Simulation::new(&cfg)?;
    let a0 = sim.design();
    let v = SymMatrix::symmetrize(a0.transpose() * a0 / m as f64);
    let x0 = &cfg.x0;
    let root_m = (m as f64).sqrt();
    let norms: Vec<Option<f64>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = sim.h0(rep);
            let fit = tls_estimate(&data).ok()?;
            let s0 = score_sum(&data, x0).ok()? / root_m;
            let correction = v.pd_solve(&s0, crate::DEFAULT_REL_TOL).ok()?;
            Some(((&fit.x_hat - x0) * root_m + correction).norm())
        })
        .collect();
    let ok: Vec<f64> = norms.into_iter().flatten().collect();
    Ok(RemainderPoint {
        m,
        valid_runs: ok.len(),
        median_norm: median(ok),
    })
}

/// Checks the first-order expansion of `X̂` and the sandwich estimator.
///
/// At `config.m`, compares the sample covariance of `√m(X̂ − X⁰)ᵀμ_a` with
/// the average `Ŝ(μ̂_a)`. For each entry of `m_values`, reports the median
/// expansion remainder. Data are always generated under the null model.
pub fn validate_estimator_clt(config: &SimConfig, m_values: &[usize]) -> Result<CltReport> {
    let cfg = config.with_alternative(None);
    let sim = Simulation::new(&cfg)?;
    let (m, d) = (cfg.m, cfg.d());
    let root_m = (m as f64).sqrt();
    let mu = &cfg.design.mu_a;

    let results: Vec<Option<(DVector<f64>, DMatrix<f64>)>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = sim.h0(rep);
            let fit = tls_estimate(&data).ok()?;
            let nuis = NuisanceEstimates::estimate(&data, &fit.x_hat).ok()?;
            let s = sandwich(&data, &fit.x_hat, &nuis.va_hat, &nuis.mu_a_hat).ok()?;
            let proj = (&fit.x_hat - &cfg.x0).transpose() * mu * root_m;
            Some((proj, s.into_matrix()))
        })
        .collect();
    let ok: Vec<_> = results.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::Domain("fewer than two successful replicates".into()));
    }
    let projections: Vec<DVector<f64>> = ok.iter().map(|(p, _)| p.clone()).collect();
    let projection_covariance = sample_covariance(&projections);
    let mean_sandwich = ok.iter().fold(DMatrix::zeros(d, d), |acc, (_, s)| acc + s) / ok.len() as f64;
    let sandwich_relative_error =
        (&mean_sandwich - &projection_covariance).norm() / projection_covariance.norm();

    let remainder = m_values
        .iter()
        .map(|&mv| remainder_point(&cfg, mv))
        .collect::<Result<Vec<_>>>()?;
    let remainder_decreasing = remainder.windows(2).all(|w| w[1].median_norm < w[0].median_norm);

    Ok(CltReport {
        m,
        reps: cfg.reps,
        valid_runs: ok.len(),
        projection_covariance,
        mean_sandwich,
        sandwich_relative_error,
        remainder,
        remainder_decreasing,
    })
}
