//! Independent numerical oracles shared by the integration tests. None of
//! these call into the code paths they are used to check.

#![allow(dead_code)]

use eivgof::sim::{DesignKind, DesignSpec, ErrorLaw, ErrorSpec, SimConfig};
use eivgof::{DMatrix, DVector, SymMatrix};

/// `Γ(d/2)` for integer `d`, from `Γ(1) = 1`, `Γ(1/2) = √π`, `Γ(x+1) = xΓ(x)`.
pub fn gamma_half_integer(d: u32) -> f64 {
    let (mut g, mut x) = if d % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Composite Simpson rule on `[a, b]` with `panels` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `P(χ²_d > x)` by quadrature of the density of `√χ²_d`,
/// `u^{d−1} e^{−u²/2} / (2^{d/2−1} Γ(d/2))`, which is smooth at 0.
pub fn chi2_sf_quadrature(x: f64, d: u32) -> f64 {
    let norm = 2f64.powf(d as f64 / 2.0 - 1.0) * gamma_half_integer(d);
    let lo = x.sqrt();
    let density = |u: f64| u.powi(d as i32 - 1) * (-0.5 * u * u).exp() / norm;
    simpson(density, lo, lo + 40.0, 40_000)
}

/// Upper quantile by bisection on [`chi2_sf_quadrature`].
pub fn chi2_quantile_bisection(alpha: f64, d: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf_quadrature(mid, d) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF from `statrs`.
pub fn phi(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

// ---- double-double arithmetic for the 1-D TLS loss ----

#[derive(Clone, Copy, Debug)]
pub struct Dd(pub f64, pub f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd(p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }
    pub fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        let lo = s.1 + self.1 + o.1;
        let r = two_sum(s.0, lo);
        Dd(r.0, r.1)
    }
    pub fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
    pub fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.0, o.0);
        let lo = p.1 + self.0 * o.1 + self.1 * o.0;
        let r = two_sum(p.0, lo);
        Dd(r.0, r.1)
    }
    pub fn lt(self, o: Dd) -> bool {
        let diff = self.add(o.neg());
        diff.0 < 0.0 || (diff.0 == 0.0 && diff.1 < 0.0)
    }
}

/// 1-D loss `Σ (a_i x − b_i)² / (1 + x²)`, compared exactly enough to
/// resolve the minimizer to ~1e-15: returns `(numerator, denominator)`.
fn scalar_loss_dd(points: &[(f64, f64)], x: f64) -> (Dd, Dd) {
    let xd = Dd::from(x);
    let mut num = Dd::from(0.0);
    for &(a, b) in points {
        let r = Dd::from(a).mul(xd).add(Dd::from(-b));
        num = num.add(r.mul(r));
    }
    let den = Dd::from(1.0).add(xd.mul(xd));
    (num, den)
}

fn loss_lt(points: &[(f64, f64)], x1: f64, x2: f64) -> bool {
    let (n1, d1) = scalar_loss_dd(points, x1);
    let (n2, d2) = scalar_loss_dd(points, x2);
    n1.mul(d2).lt(n2.mul(d1))
}

/// Minimizer of the 1-D TLS loss over `[lo, hi]`: grid scan to bracket the
/// global minimum, then golden-section search.
pub fn golden_section_tls_1d(points: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let grid = 20_000;
    let step = (hi - lo) / grid as f64;
    let mut best = 0;
    for i in 1..=grid {
        if loss_lt(points, lo + i as f64 * step, lo + best as f64 * step) {
            best = i;
        }
    }
    let mut a = (lo + (best as f64 - 1.0) * step).max(lo);
    let mut b = (lo + (best as f64 + 1.0) * step).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..200 {
        if loss_lt(points, c, d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Nelder–Mead on `f: ℝ^k → ℝ`. Returns every point evaluated with its value.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    iters: usize,
) -> Vec<(Vec<f64>, f64)> {
    let k = start.len();
    let mut probes = Vec::new();
    let eval = |x: Vec<f64>, probes: &mut Vec<(Vec<f64>, f64)>| {
        let v = f(&x);
        probes.push((x.clone(), v));
        (x, v)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![eval(start.to_vec(), &mut probes)];
    for i in 0..k {
        let mut x = start.to_vec();
        x[i] += step;
        simplex.push(eval(x, &mut probes));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[k].clone();
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|p| p.0[j]).sum::<f64>() / k as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let refl = eval(along(1.0), &mut probes);
        if refl.1 < simplex[0].1 {
            let exp = eval(along(2.0), &mut probes);
            simplex[k] = if exp.1 < refl.1 { exp } else { refl };
        } else if refl.1 < simplex[k - 1].1 {
            simplex[k] = refl;
        } else {
            let contr = eval(along(-0.5), &mut probes);
            if contr.1 < worst.1 {
                simplex[k] = contr;
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = p.0.iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
                    *p = eval(x, &mut probes);
                }
            }
        }
    }
    probes
}

/// Reference study used by the Monte Carlo tests: n = d = 2, non-centered
/// correlated Gaussian design, normal errors.
pub fn reference_config(m: usize, reps: usize, sigma: f64) -> SimConfig {
    SimConfig {
        design: DesignSpec {
            kind: DesignKind::FrozenGaussian,
            mu_a: DVector::from_column_slice(&[1.0, -0.5]),
            s_a: SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap(),
            design_seed: 2024,
        },
        errors: ErrorSpec {
            law: ErrorLaw::Normal,
            sigma,
        },
        x0: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]),
        m,
        reps,
        alpha: 0.05,
        master_seed: 1,
        alternative: None,
    }
}
