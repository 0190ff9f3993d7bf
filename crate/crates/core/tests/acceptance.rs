//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.
//!
//! `cargo test -p eivgof-core --test acceptance`

mod common;

use std::time::{Duration, Instant};

use common::{chi2_quantile_bisection, golden_section_tls_1d, nelder_mead, phi, reference_config};
use eivgof::sim::{
    covariance_check, monte_carlo_level, monte_carlo_power, population_sigma_t, theoretical_tau,
    validate_estimator_clt, LocalAlternativeSpec, SimConfig, Simulation,
};
use eivgof::tls::SCORE_REL_TOL;
use eivgof::{
    chi2_upper_quantile, estimate_sigma2, loss_total, noncentral_chi2_sf, run_test, tls_estimate,
    DMatrix, DVector, EivDataset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Worst relative score-equation residual seen by any fit in the suite.
static MAX_SCORE_RESIDUAL: std::sync::Mutex<f64> = std::sync::Mutex::new(0.0);

fn note_score_residual(r: f64) {
    let mut g = MAX_SCORE_RESIDUAL.lock().unwrap();
    if !(r <= *g) {
        *g = r;
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (EivDataset, usize, usize) {
    let n = rng.random_range(1..=3);
    let d = rng.random_range(1..=2);
    let m = rng.random_range(n + d + 2..=30);
    let noise = 0.05 + rng.random::<f64>() * 0.5;
    let a0 = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.0 + 0.5);
    let x0 = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b0 = &a0 * &x0;
    let a = a0.map(|v| v + noise * rng.sample::<f64, _>(StandardNormal));
    let b = b0.map(|v| v + noise * rng.sample::<f64, _>(StandardNormal));
    (EivDataset::new(a, b).unwrap(), n, d)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_1d = 0.0f64;
    let mut one_d = 0;
    let mut probes = 0usize;
    for _ in 0..200 {
        let (data, n, d) = random_instance(&mut rng);
        let fit = match tls_estimate(&data) {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("fit failed: {e}")),
        };
        note_score_residual(fit.score_residual);
        let q_hat = fit.loss_at_solution;
        let f = |v: &[f64]| loss_total(&data, &DMatrix::from_column_slice(n, d, v)).unwrap();
        let starts = [
            (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect::<Vec<_>>(),
            fit.x_hat.iter().map(|v| v + 0.05).collect(),
        ];
        for s in &starts {
            for (_, q) in nelder_mead(&f, s, 0.3, 300) {
                probes += 1;
                worst_excess = worst_excess.max(q_hat - q);
            }
        }
        if n == 1 && d == 1 {
            one_d += 1;
            let pts: Vec<(f64, f64)> = (0..data.m()).map(|i| (data.a()[(i, 0)], data.b()[(i, 0)])).collect();
            let g = golden_section_tls_1d(&pts, -10.0, 10.0);
            if fit.x_hat[(0, 0)].abs() < 10.0 {
                worst_1d = worst_1d.max((fit.x_hat[(0, 0)] - g).abs());
            }
        }
    }
    // fixed 1-D example
    let pts = [(1.0, 2.0), (2.0, 3.9), (3.0, 6.1), (4.0, 8.0)];
    let data = EivDataset::new(
        DMatrix::from_column_slice(4, 1, &pts.map(|p| p.0)),
        DMatrix::from_column_slice(4, 1, &pts.map(|p| p.1)),
    )
    .unwrap();
    let fit = tls_estimate(&data).unwrap();
    note_score_residual(fit.score_residual);
    worst_1d = worst_1d.max((fit.x_hat[(0, 0)] - golden_section_tls_1d(&pts, -10.0, 10.0)).abs());

    let elapsed = start.elapsed();
    let pass = worst_excess <= 1e-12 && worst_1d <= 1e-9 && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "max Q(X̂)−Q(probe) = {worst_excess:.3e} over {probes} probes; max |X̂−golden| = {worst_1d:.3e} ({} 1-D cases); {:.2}s",
            one_d + 1,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let report = monte_carlo_level(&reference_config(2000, 5000, 0.1)).unwrap();
    note_score_residual(report.max_score_residual);
    let elapsed = start.elapsed();
    let pass = (0.040..=0.065).contains(&report.reject_rate)
        && report.ks_distance < 0.03
        && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "reject rate {:.4} ({} / {} valid, {} failed), KS {:.4}, {:.1}s on {} thread(s)",
            report.reject_rate,
            report.rejections,
            report.valid_runs,
            report.failed_runs,
            report.ks_distance,
            elapsed.as_secs_f64(),
            rayon::current_num_threads()
        ),
    )
}

fn criterion_4() -> Outcome {
    let config = reference_config(10_000, 200, 0.3);
    let sim = Simulation::new(&config).unwrap();
    let sigma2 = config.errors.variance();
    let x0_norm = config.x0.norm();
    let mut good_x = 0;
    let mut good_s = 0;
    let mut worst_x = 0.0f64;
    let mut worst_s = 0.0f64;
    for rep in 0..config.reps as u64 {
        let data = sim.h0(rep);
        let fit = tls_estimate(&data).unwrap();
        note_score_residual(fit.score_residual);
        let ex = (&fit.x_hat - &config.x0).norm() / x0_norm;
        let es = (estimate_sigma2(&data, &fit.x_hat).unwrap() - sigma2).abs() / sigma2;
        worst_x = worst_x.max(ex);
        worst_s = worst_s.max(es);
        good_x += (ex < 0.02) as usize;
        good_s += (es < 0.05) as usize;
    }
    let need = (0.95 * config.reps as f64).ceil() as usize;
    outcome(
        good_x >= need && good_s >= need,
        format!(
            "‖X̂−X⁰‖/‖X⁰‖ < 0.02 in {good_x}/200 (worst {worst_x:.4}); |σ̂²−σ²|/σ² < 0.05 in {good_s}/200 (worst {worst_s:.4})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let check = covariance_check(&reference_config(5000, 2000, 0.3)).unwrap();
    outcome(
        check.relative_error < 0.15,
        format!(
            "relative Frobenius error {:.4} over {} replicates",
            check.relative_error, check.valid_runs
        ),
    )
}

fn criterion_6() -> Outcome {
    let base = reference_config(2000, 3000, 0.1);
    let sigma_t = population_sigma_t(&base.design, &base.x0, &base.errors).unwrap();
    let direction = LocalAlternativeSpec::Constant {
        c: DVector::from_column_slice(&[1.0, 1.0]),
    };
    let unit_tau = theoretical_tau(&base.design, &direction, &sigma_t).unwrap();
    let q = chi2_upper_quantile(0.05, 2).unwrap();

    let mut pass = true;
    let mut rates = Vec::new();
    let mut parts = Vec::new();
    for target in [1.0, 2.0, 3.0] {
        let alt = direction.scaled(target / unit_tau);
        let report = monte_carlo_power(&base.with_alternative(Some(alt))).unwrap();
        note_score_residual(report.empirical.max_score_residual);
        let theory = noncentral_chi2_sf(q, 2, target).unwrap();
        let gap = (report.reject_rate() - theory).abs();
        pass &= gap <= 0.05 && (report.tau_theoretical - target).abs() < 1e-9;
        rates.push(report.reject_rate());
        parts.push(format!(
            "τ={target}: empirical {:.4} vs {theory:.4}",
            report.reject_rate()
        ));
    }
    let increasing = rates.windows(2).all(|w| w[0] < w[1]);
    outcome(pass && increasing, format!("{}; increasing: {increasing}", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut worst_q = 0.0f64;
    for d in 1..=10 {
        for alpha in [0.01, 0.05, 0.1] {
            let got = chi2_upper_quantile(alpha, d).unwrap();
            let oracle = chi2_quantile_bisection(alpha, d);
            worst_q = worst_q.max((got - oracle).abs());
        }
    }
    let mut worst_nc = 0.0f64;
    for i in 0..=40 {
        let tau = i as f64 * 0.15;
        for j in 0..=60 {
            let x = 0.001 + j as f64 * 0.5;
            let r = f64::sqrt(x);
            let closed = phi(tau - r) + phi(-tau - r);
            worst_nc = worst_nc.max((noncentral_chi2_sf(x, 1, tau).unwrap() - closed).abs());
        }
    }
    outcome(
        worst_q <= 1e-8 && worst_nc <= 1e-9,
        format!("max quantile error {worst_q:.3e}; max noncentral d=1 error {worst_nc:.3e}"),
    )
}

fn criterion_8() -> Outcome {
    let report = validate_estimator_clt(&reference_config(2000, 400, 0.3), &[500, 2000, 8000]).unwrap();
    let meds: Vec<String> = report
        .remainder
        .iter()
        .map(|p| format!("m={}: {:.4}", p.m, p.median_norm))
        .collect();
    outcome(report.remainder_decreasing, format!("median remainder {}", meds.join(", ")))
}

fn json_for_threads(threads: usize, f: &(dyn Fn() -> String + Sync)) -> String {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn criterion_9() -> Outcome {
    let level_cfg = reference_config(300, 200, 0.2);
    let power_cfg = level_cfg.with_alternative(Some(LocalAlternativeSpec::Quadratic {
        v: DVector::from_column_slice(&[0.3, -0.2]),
        q: eivgof::SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, -0.5]]).unwrap(),
    }));
    let runs: Vec<(&str, Box<dyn Fn() -> String + Sync>)> = vec![
        (
            "level",
            Box::new(|| serde_json::to_string(&monte_carlo_level(&level_cfg).unwrap()).unwrap()),
        ),
        (
            "power",
            Box::new(|| serde_json::to_string(&monte_carlo_power(&power_cfg).unwrap()).unwrap()),
        ),
        (
            "clt",
            Box::new(|| {
                serde_json::to_string(&validate_estimator_clt(&level_cfg, &[100, 300]).unwrap()).unwrap()
            }),
        ),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, f) in &runs {
        let outputs: Vec<String> = [1, 4, 8].iter().map(|&t| json_for_threads(t, f.as_ref())).collect();
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        let repeat = json_for_threads(4, f.as_ref()) == outputs[1];
        pass &= same && repeat;
        notes.push(format!("{name}: {} bytes identical={}", outputs[0].len(), same && repeat));
    }
    outcome(pass, notes.join(", "))
}

fn criterion_10() -> Outcome {
    let config: SimConfig = reference_config(500, 1, 0.3);
    let sim = Simulation::new(&config).unwrap();
    let mut worst_scale = 0.0f64;
    let mut worst_perm = 0.0f64;
    let mut worst_rot = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for rep in 0..20 {
        let data = sim.h0(rep);
        let base = run_test(&data, 0.05).unwrap();
        note_score_residual(base.fit.score_residual);

        let kappa = 0.01 + rng.random::<f64>() * 50.0;
        let scaled = EivDataset::new(data.a() * kappa, data.b() * kappa).unwrap();
        let t2 = run_test(&scaled, 0.05).unwrap().t2;
        worst_scale = worst_scale.max((t2 - base.t2).abs() / base.t2);

        let mut perm: Vec<usize> = (0..data.m()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let t2 = run_test(&data.permute_rows(&perm).unwrap(), 0.05).unwrap().t2;
        worst_perm = worst_perm.max((t2 - base.t2).abs() / base.t2);

        let g = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = g.qr().q();
        let rotated = EivDataset::new(data.a() * &r, data.b().clone()).unwrap();
        let xr = tls_estimate(&rotated).unwrap().x_hat;
        let expected = r.transpose() * &base.fit.x_hat;
        worst_rot = worst_rot.max((xr - &expected).norm() / expected.norm());
    }
    outcome(
        worst_scale <= 1e-8 && worst_perm <= 1e-10 && worst_rot <= 1e-10,
        format!(
            "T² scale {worst_scale:.2e}, permutation {worst_perm:.2e}, X̂ rotation {worst_rot:.2e}"
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 TLS oracle equivalence", criterion_1),
        ("3 level calibration", criterion_3),
        ("4 consistency", criterion_4),
        ("5 sandwich consistency", criterion_5),
        ("6 local-alternative power", criterion_6),
        ("7 distribution functions", criterion_7),
        ("8 expansion remainder trend", criterion_8),
        ("9 determinism across threads", criterion_9),
        ("10 invariance suite", criterion_10),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        failures += (!o.pass) as usize;
        println!(
            "[{}] criterion {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    // criterion 2 aggregates every fit above
    let worst = *MAX_SCORE_RESIDUAL.lock().unwrap();
    let pass2 = worst <= SCORE_REL_TOL;
    failures += (!pass2) as usize;
    println!(
        "[{}] criterion 2 score-root residual: max ‖Σs‖/(1+‖Σabᵀ‖) = {worst:.3e} over all fits",
        if pass2 { "PASS" } else { "FAIL" }
    );

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
