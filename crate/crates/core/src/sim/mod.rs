//! Data generation under the null model and local alternatives, and the
//! Monte Carlo studies built on it.
//!
//! Every replicate draws its errors from a ChaCha stream selected by
//! `(master_seed, rep_index)`, and the design `A⁰` is drawn once from
//! `design_seed` and shared read-only. Results are therefore independent of
//! how replicates are scheduled across threads.

mod config;
mod generate;
mod study;
mod theory;

pub use config::{DesignKind, DesignSpec, ErrorLaw, ErrorSpec, LocalAlternativeSpec, SimConfig};
pub use generate::{generate_design, generate_h0, generate_h1m, replicate_rng, Simulation};
pub use study::{
    covariance_check, ks_distance, monte_carlo_level, monte_carlo_power, power_curve,
    validate_estimator_clt, CltReport, CovarianceCheck, FailureTally, LevelReport, PowerCurve,
    PowerReport, RemainderPoint, ReplicateRecord,
};
pub use theory::{c_t, population_sigma_t, population_va, theoretical_tau};
