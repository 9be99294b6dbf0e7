//! Generalized Levy exponents, characteristic functionals and their
//! continuity bounds.
//!
//! `F(phi) = int f(phi(r)) dr` is evaluated by midpoint quadrature on the
//! grid of `phi`, using family closed forms where they exist. The bound
//! machinery works with the metrics
//! `h_p(x, y) = sqrt((|x|^p + |y|^p) |x - y|^p)` and
//! `H_p(f, g) = sqrt((|f|_p^p + |g|_p^p) |f - g|_p^p)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{Field, GridError};
use crate::levy::{LevyError, LevyMeasure, LevyTriplet};

pub use crate::grid::Field as SampledFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error("orders must satisfy 0 < p <= q <= 2, got p = {p}, q = {q}")]
    Orders { p: f64, q: f64 },
    #[error("measure is not in M({p_min}, {p_max}): {detail}")]
    Incompatible { p_min: f64, p_max: f64, detail: String },
    #[error("generalized exponent is not finite")]
    Overflow,
    #[error("at most 16 test functions, got {0}")]
    TooMany(usize),
}

/// `h_p(x, y)`.
pub fn h_metric(p: f64, x: f64, y: f64) -> f64 {
    ((x.abs().powf(p) + y.abs().powf(p)) * (x - y).abs().powf(p)).sqrt()
}

/// `H_p(f, g)` with midpoint quasi-norms.
pub fn h_metric_fields(p: f64, f: &Field, g: &Field) -> Result<f64, CharError> {
    let diff = f.zip_with(g, |a, b| a - b)?;
    Ok(((f.norm_pow(p) + g.norm_pow(p)) * diff.norm_pow(p)).sqrt())
}

/// `F(phi)` with family closed forms for the jump part.
pub fn generalized_exponent(t: &LevyTriplet, phi: &Field) -> Result<Complex64, CharError> {
    phi.check_finite()?;
    let dv = phi.grid().cell_volume();
    let integral: f64 = phi.values().iter().sum::<f64>() * dv;
    let mut total = Complex64::new(-0.5 * t.sigma2 * phi.norm_pow(2.0), t.mu * integral);
    if let Some(v) = &t.v {
        total += match v {
            LevyMeasure::Stable { alpha, scale } => Complex64::new(-scale.powf(*alpha) * phi.norm_pow(*alpha), 0.0),
            LevyMeasure::VarianceGamma { lambda } => {
                let l2 = lambda * lambda;
                let s: f64 = phi.values().iter().map(|x| -(x * x / l2).ln_1p()).sum();
                Complex64::new(s * dv, 0.0)
            }
            _ => {
                let mut s = Complex64::new(0.0, 0.0);
                for &x in phi.values() {
                    s += v.jump_exponent(x)?;
                }
                s * dv
            }
        };
    }
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(CharError::Overflow);
    }
    Ok(total)
}

/// `exp(F(phi))`.
pub fn characteristic_functional(t: &LevyTriplet, phi: &Field) -> Result<Complex64, CharError> {
    Ok(generalized_exponent(t, phi)?.exp())
}

/// Characteristic function of `(<s, phi_1>, ..., <s, phi_N>)` at `w`.
pub fn finite_dim_cf(t: &LevyTriplet, phis: &[Field], w: &[f64]) -> Result<Complex64, CharError> {
    let Some(first) = phis.first() else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    let mut acc = Field::zeros(first.grid());
    for (phi, &wi) in phis.iter().zip(w) {
        acc = acc.zip_with(phi, |a, b| a + wi * b)?;
    }
    characteristic_functional(t, &acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramReport {
    pub n: usize,
    pub min_eigenvalue: f64,
    /// Smallest `a^H G a / |a|^2` over the random probe vectors.
    pub min_quadratic_form: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Positive-definiteness check of `G_ij = cf(phi_i - phi_j)`.
pub fn psd_gram_check(t: &LevyTriplet, phis: &[Field], samples: usize, seed: u64) -> Result<GramReport, CharError> {
    let n = phis.len();
    if n > 16 {
        return Err(CharError::TooMany(n));
    }
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = phis[i].zip_with(&phis[j], |a, b| a - b)?;
            g[(i, j)] = characteristic_functional(t, &d)?;
        }
    }
    let herm = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let min_eigenvalue = if n == 0 {
        0.0
    } else {
        herm.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_q = f64::INFINITY;
    for _ in 0..samples {
        let a = nalgebra::DVector::<Complex64>::from_fn(n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let norm2 = a.norm_squared();
        if norm2 > 0.0 {
            let q = (a.adjoint() * &g * &a)[(0, 0)];
            min_q = min_q.min(q.re / norm2);
        }
    }
    let tolerance = 1e-8 * n as f64;
    Ok(GramReport {
        n,
        min_eigenvalue,
        min_quadratic_form: min_q,
        tolerance,
        passed: min_eigenvalue >= -tolerance && (samples == 0 || min_q >= -tolerance),
    })
}

/// Explicit constants of the g-control and continuity bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConstants {
    pub p_min: f64,
    pub p_max: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// 1 was added because the measure is asymmetric.
    pub asymmetric: bool,
    /// 1 was added because of a nonzero drift.
    pub drift: bool,
    /// 2 was added because of a Gaussian part.
    pub gaussian: bool,
    /// Per-part constants in the order real-inner, real-outer, imaginary-inner, imaginary-outer.
    pub parts: [f64; 4],
    /// Weight with `1 = w p_min + (1 - w) p_max`, used to bound `H_1`.
    pub drift_weight: f64,
}

pub fn bound_constants(t: &LevyTriplet, p: f64, q: f64) -> Result<BoundConstants, CharError> {
    if !(p > 0.0 && p <= q && q <= 2.0) {
        return Err(CharError::Orders { p, q });
    }
    let asymmetric = !t.is_symmetric_measure();
    let drift = t.mu != 0.0;
    let gaussian = t.sigma2 != 0.0;
    let mut set = vec![p, q];
    if asymmetric || drift {
        set.push(1.0);
    }
    if gaussian {
        set.push(2.0);
    }
    let p_min = set.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = set.iter().copied().fold(0.0, f64::max);
    let (mu0, mu_inf) = match &t.v {
        Some(v) => {
            let inner = v.moment(p_max)?.mu_k0;
            let outer = v.moment(p_min)?.mu_k_inf;
            if !inner.is_finite() || !outer.is_finite() {
                let detail = if inner.is_finite() {
                    format!("outer moment of order {p_min} diverges")
                } else {
                    format!("inner moment of order {p_max} diverges")
                };
                return Err(CharError::Incompatible { p_min, p_max, detail });
            }
            (inner, outer)
        }
        None => (0.0, 0.0),
    };
    let two = |e: f64| 2f64.powf(e);
    let re0 = two(1.0 - p_max).max(two(0.5 * (1.0 - p_max))) * mu0;
    let re_inf = two(0.5 * (1.0 - p_min)) * 1f64.max(two(0.5 * (1.0 - p_min))) * mu_inf;
    let (im0, im_inf) = if asymmetric {
        (two(0.5 * (p_max + 5.0)) * mu0, 2.0 * mu_inf)
    } else {
        (0.0, 0.0)
    };
    let kappa1 = re_inf + im_inf;
    let kappa2 = re0 + im0;
    let drift_weight = if p_max > p_min {
        (p_max - 1.0) / (p_max - p_min)
    } else {
        1.0
    };
    let m = t.mu.abs();
    let nu1 = kappa1 + m * drift_weight.sqrt();
    let nu2 = kappa2 + m * (1.0 - drift_weight).sqrt() + t.sigma2 / std::f64::consts::SQRT_2;
    Ok(BoundConstants {
        p_min,
        p_max,
        kappa1,
        kappa2,
        nu1,
        nu2,
        asymmetric,
        drift,
        gaussian,
        parts: [re0, re_inf, im0, im_inf],
        drift_weight,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundViolation {
    pub w1: f64,
    pub w2: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GBoundReport {
    pub trials: usize,
    pub max_ratio: f64,
    pub violations: Vec<BoundViolation>,
}

impl GBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Random check of `|g(w2) - g(w1)| <= kappa1 h_pmin + kappa2 h_pmax` for
/// pairs drawn half uniformly on `[-range, range]^2` and half with
/// log-uniform magnitudes in `[1e-3, range]`.
pub fn verify_g_bound(
    t: &LevyTriplet,
    bc: &BoundConstants,
    trials: usize,
    seed: u64,
    range: f64,
) -> Result<GBoundReport, CharError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |i: usize| -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        if i.is_multiple_of(2) {
            range * (2.0 * rng.random::<f64>() - 1.0)
        } else {
            sign * 10f64.powf(-3.0 + (range.log10() + 3.0) * rng.random::<f64>())
        }
    };
    let mut max_ratio: f64 = 0.0;
    let mut violations = Vec::new();
    for i in 0..trials {
        let (w1, w2) = (draw(i), draw(i));
        let lhs = (t.jump_exponent(w2)? - t.jump_exponent(w1)?).norm();
        let rhs = bc.kappa1 * h_metric(bc.p_min, w1, w2) + bc.kappa2 * h_metric(bc.p_max, w1, w2);
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > rhs + 1e-9 * (1.0 + rhs) {
            violations.push(BoundViolation { w1, w2, lhs, rhs });
        }
    }
    Ok(GBoundReport {
        trials,
        max_ratio,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
}

/// Check of `|F(phi) - F(psi)| <= nu1 H_pmin + nu2 H_pmax`.
pub fn verify_continuity_bound(
    t: &LevyTriplet,
    bc: &BoundConstants,
    phi: &Field,
    psi: &Field,
) -> Result<ContinuityReport, CharError> {
    let lhs = (generalized_exponent(t, phi)? - generalized_exponent(t, psi)?).norm();
    let rhs = bc.nu1 * h_metric_fields(bc.p_min, phi, psi)? + bc.nu2 * h_metric_fields(bc.p_max, phi, psi)?;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(ContinuityReport {
        lhs,
        rhs,
        ratio,
        passed: lhs <= rhs + 1e-9 * (1.0 + rhs),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub draws: usize,
    /// Violations of the pointwise bounds on `|x - y|^p` and `|x^2 - y^2|^(p/2)`.
    pub pointwise: usize,
    /// Violations of `sum h_p(f, g) h^d <= H_p(f, g)`.
    pub summed: usize,
    /// Violations of `H_{l p + (1 - l) q} <= sqrt(l) H_p + sqrt(1 - l) H_q`.
    pub interpolation: usize,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.pointwise == 0 && self.summed == 0 && self.interpolation == 0
    }
}

/// Random draws of the three metric inequalities behind the bounds, with
/// `1e-12` relative slack. Fields are random vectors on a 1-D grid of 16 cells.
pub fn lemma_checks(draws: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = crate::grid::Grid::centered(&[16], 0.25).expect("static grid");
    let exceeds = |lhs: f64, rhs: f64| lhs > rhs * (1.0 + 1e-12) + 1e-300;
    let mut report = LemmaReport {
        draws,
        pointwise: 0,
        summed: 0,
        interpolation: 0,
    };
    for _ in 0..draws {
        let p = 0.05 + 1.95 * rng.random::<f64>();
        let x = 10.0 * (2.0 * rng.random::<f64>() - 1.0);
        let y = 10.0 * (2.0 * rng.random::<f64>() - 1.0);
        let bound = 1f64.max(2f64.powf(0.5 * (p - 1.0))) * h_metric(p, x, y);
        if exceeds((x - y).abs().powf(p), bound) || exceeds((x * x - y * y).abs().powf(0.5 * p), bound) {
            report.pointwise += 1;
        }

        let mut random_field = || {
            let vals = (0..16).map(|_| 4.0 * (2.0 * rng.random::<f64>() - 1.0)).collect();
            Field::new(grid.clone(), vals).expect("matching length")
        };
        let f = random_field();
        let g = random_field();
        let q = 0.05 + 1.95 * rng.random::<f64>();
        let lam = rng.random::<f64>();
        let dv = grid.cell_volume();
        let pointwise_sum: f64 = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(&a, &b)| h_metric(p, a, b))
            .sum::<f64>()
            * dv;
        let hp = h_metric_fields(p, &f, &g).expect("same grid");
        if exceeds(pointwise_sum, hp) {
            report.summed += 1;
        }
        let hq = h_metric_fields(q, &f, &g).expect("same grid");
        let hmix = h_metric_fields(lam * p + (1.0 - lam) * q, &f, &g).expect("same grid");
        if exceeds(hmix, lam.sqrt() * hp + (1.0 - lam).sqrt() * hq) {
            report.interpolation += 1;
        }
    }
    report
}
