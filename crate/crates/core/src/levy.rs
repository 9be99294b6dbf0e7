//! Levy measures, triplets, moments and pointwise Levy exponents.
//!
//! The exponent of a triplet `(mu, sigma2, V)` is
//! `f(w) = j mu w - sigma2 w^2 / 2 + g(w)` with the compensated jump part
//! `g(w) = int (e^{j a w} - 1 - j a w 1_{|a|<1}) V(da)`.
//!
//! Moments are extended reals: a divergent moment is `f64::INFINITY`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::gamma::{gamma, gamma_li, gamma_ui};
use thiserror::Error;

use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("moment order must be nonnegative, got {0}")]
    NegativeOrder(f64),
    #[error("not a Levy measure: {0}")]
    NotLevy(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

fn invalid(msg: impl Into<String>) -> LevyError {
    LevyError::InvalidParameter(msg.into())
}

/// Amplitude law of a compound-Poisson measure.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityLaw {
    Dirac {
        a0: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    /// Mass `p_hi` at `hi` and `1 - p_hi` at `lo`.
    TwoPoint {
        lo: f64,
        hi: f64,
        p_hi: f64,
    },
}

impl ProbabilityLaw {
    pub fn validate(&self) -> Result<(), LevyError> {
        let finite = |x: f64| x.is_finite();
        match *self {
            Self::Dirac { a0 } => {
                if !finite(a0) || a0 == 0.0 {
                    return Err(invalid("Dirac amplitude must be finite and nonzero"));
                }
            }
            Self::Uniform { lo, hi } => {
                if !(finite(lo) && finite(hi) && lo < hi) {
                    return Err(invalid("uniform law needs finite lo < hi"));
                }
            }
            Self::Gaussian { mean, var } => {
                if !(finite(mean) && var > 0.0 && finite(var)) {
                    return Err(invalid("Gaussian law needs finite mean and var > 0"));
                }
            }
            Self::TwoPoint { lo, hi, p_hi } => {
                if !(finite(lo) && finite(hi) && lo < hi) {
                    return Err(invalid("two-point law needs finite lo < hi"));
                }
                if !(0.0..=1.0).contains(&p_hi) {
                    return Err(invalid("two-point probability must lie in [0, 1]"));
                }
                if (lo == 0.0 && p_hi < 1.0) || (hi == 0.0 && p_hi > 0.0) {
                    return Err(invalid("two-point law puts mass at 0"));
                }
            }
        }
        Ok(())
    }

    /// Characteristic function `E e^{j a w}`.
    pub fn cf(&self, w: f64) -> Complex64 {
        let e = |a: f64| Complex64::from_polar(1.0, a * w);
        match *self {
            Self::Dirac { a0 } => e(a0),
            Self::Uniform { lo, hi } => {
                let x = 0.5 * w * (hi - lo);
                if x.abs() < 1e-8 {
                    e(0.5 * (lo + hi)) * (1.0 - x * x / 6.0)
                } else {
                    e(0.5 * (lo + hi)) * (x.sin() / x)
                }
            }
            Self::Gaussian { mean, var } => e(mean) * (-0.5 * var * w * w).exp(),
            Self::TwoPoint { lo, hi, p_hi } => e(hi) * p_hi + e(lo) * (1.0 - p_hi),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Dirac { a0 } => a0,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Gaussian { mean, var } => Normal::new(mean, var.sqrt()).expect("validated").sample(rng),
            Self::TwoPoint { lo, hi, p_hi } => {
                if rng.random::<f64>() < p_hi {
                    hi
                } else {
                    lo
                }
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match *self {
            Self::Dirac { .. } => false,
            Self::Uniform { lo, hi } => lo == -hi,
            Self::Gaussian { mean, .. } => mean == 0.0,
            Self::TwoPoint { lo, hi, p_hi } => lo == -hi && p_hi == 0.5,
        }
    }

    /// `(int_{|a|<1} |a|^k dP, int_{|a|>=1} |a|^k dP)`.
    pub fn split_abs_moment(&self, k: f64) -> (f64, f64) {
        let atom = |a: f64, m: f64| -> (f64, f64) {
            if m == 0.0 {
                (0.0, 0.0)
            } else if a.abs() < 1.0 {
                (m * a.abs().powf(k), 0.0)
            } else {
                (0.0, m * a.abs().powf(k))
            }
        };
        match *self {
            Self::Dirac { a0 } => atom(a0, 1.0),
            Self::TwoPoint { lo, hi, p_hi } => {
                let (a, b) = atom(lo, 1.0 - p_hi);
                let (c, d) = atom(hi, p_hi);
                (a + c, b + d)
            }
            Self::Uniform { lo, hi } => {
                let len = hi - lo;
                let inner = abs_power_integral(lo.max(-1.0), hi.min(1.0), k);
                let outer = abs_power_integral(lo, hi.min(-1.0), k) + abs_power_integral(lo.max(1.0), hi, k);
                (inner / len, outer / len)
            }
            Self::Gaussian { mean, var } => {
                let s = var.sqrt();
                let pdf = move |a: f64| (-(a - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
                let q = move |a: f64| a.abs().powf(k) * pdf(a);
                let inner = graded_integral(-1.0, 1.0, s, &q);
                let reach = 40.0 * s;
                let outer = graded_integral(1.0, (mean + reach).max(1.0), s, &q)
                    + graded_integral((mean - reach).min(-1.0), -1.0, s, &q);
                (inner, outer)
            }
        }
    }

    /// Signed inner mean `int_{|a|<1} a dP`, the compensator weight.
    pub fn inner_mean(&self) -> f64 {
        let atom = |a: f64, m: f64| if a.abs() < 1.0 { m * a } else { 0.0 };
        match *self {
            Self::Dirac { a0 } => atom(a0, 1.0),
            Self::TwoPoint { lo, hi, p_hi } => atom(lo, 1.0 - p_hi) + atom(hi, p_hi),
            Self::Uniform { lo, hi } => {
                let (a, b) = (lo.max(-1.0), hi.min(1.0));
                if a >= b {
                    0.0
                } else {
                    0.5 * (b * b - a * a) / (hi - lo)
                }
            }
            Self::Gaussian { mean, var } => {
                let pdf = move |a: f64| a * (-(a - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
                graded_integral(-1.0, 1.0, var.sqrt(), &pdf)
            }
        }
    }
}

/// `int_x^y |a|^k da`, zero for an empty interval.
fn abs_power_integral(x: f64, y: f64, k: f64) -> f64 {
    if x >= y {
        return 0.0;
    }
    let prim = |t: f64| t.signum() * t.abs().powf(k + 1.0) / (k + 1.0);
    prim(y) - prim(x)
}

/// Integral over [a, b] with panels no wider than `scale / 4`, graded
/// dyadically toward 0 when the interval contains it.
fn graded_integral(a: f64, b: f64, scale: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a < 0.0 && b > 0.0 {
        return graded_integral(a, 0.0, scale, f) + graded_integral(0.0, b, scale, f);
    }
    let (lo, hi, sign) = if b <= 0.0 { (-b, -a, -1.0) } else { (a, b, 1.0) };
    let g = |t: f64| f(sign * t);
    let mut acc = 0.0;
    let mut start = lo;
    if lo == 0.0 {
        let mut top = hi.min(1.0);
        for _ in 0..60 {
            acc += quad::panel(0.5 * top, top, g);
            top *= 0.5;
        }
        start = hi.min(1.0);
    }
    if hi > start {
        let m = (((hi - start) / (0.25 * scale)).ceil() as usize).clamp(4, 20_000);
        acc += quad::panels(start, hi, m, g);
    }
    acc
}

/// User supplied Levy density on the punctured real line.
#[derive(Clone)]
pub struct CustomDensity {
    name: String,
    v: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomDensity {
    pub fn new(name: impl Into<String>, v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            v: Arc::new(v),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, a: f64) -> f64 {
        (self.v)(a)
    }
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomDensity({})", self.name)
    }
}

impl PartialEq for CustomDensity {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.v, &other.v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LevyMeasure {
    /// Density `C / |a|^{alpha+1}` normalised so that `g(w) = -scale^alpha |w|^alpha`.
    Stable {
        alpha: f64,
        scale: f64,
    },
    /// Density `e^{-lambda |a|} / |a|`.
    VarianceGamma {
        lambda: f64,
    },
    /// `rate * P` for an amplitude law `P`.
    CompoundPoisson {
        rate: f64,
        law: ProbabilityLaw,
    },
    Custom(CustomDensity),
}

/// Moments of a Levy measure split at `|a| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub k: f64,
    pub mu_k0: f64,
    pub mu_k_inf: f64,
    pub mu_k: f64,
}

impl MomentReport {
    fn new(k: f64, mu_k0: f64, mu_k_inf: f64) -> Self {
        Self {
            k,
            mu_k0,
            mu_k_inf,
            mu_k: mu_k0 + mu_k_inf,
        }
    }
}

/// `int_0^inf (1 - cos u) u^{-1-alpha} du` in closed form.
pub fn one_minus_cos_integral(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        PI / 2.0
    } else {
        gamma(1.0 - alpha) * (PI * alpha / 2.0).cos() / alpha
    }
}

/// Density constant `C` of the symmetric alpha-stable measure with the given scale.
pub fn stable_constant(alpha: f64, scale: f64) -> f64 {
    scale.powf(alpha) / (2.0 * one_minus_cos_integral(alpha))
}

impl LevyMeasure {
    pub fn validate(&self) -> Result<(), LevyError> {
        match self {
            Self::Stable { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid(format!("stable alpha must lie in (0, 2), got {alpha}")));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("stable scale must be positive"));
                }
            }
            Self::VarianceGamma { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("variance-gamma lambda must be positive"));
                }
            }
            Self::CompoundPoisson { rate, law } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid("Poisson rate must be positive"));
                }
                law.validate()?;
            }
            Self::Custom(c) => {
                let m2 = self.moment(2.0)?;
                let m0 = self.moment(0.0)?;
                if !m2.mu_k0.is_finite() || !m0.mu_k_inf.is_finite() {
                    return Err(LevyError::NotLevy(format!(
                        "min(1, a^2) is not integrable against {}",
                        c.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pointwise density, when the measure has one.
    pub fn density(&self, a: f64) -> Option<f64> {
        match self {
            Self::Stable { alpha, scale } => Some(stable_constant(*alpha, *scale) / a.abs().powf(alpha + 1.0)),
            Self::VarianceGamma { lambda } => Some((-lambda * a.abs()).exp() / a.abs()),
            Self::CompoundPoisson { .. } => None,
            Self::Custom(c) => Some(c.eval(a)),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Stable { .. } | Self::VarianceGamma { .. } => true,
            Self::CompoundPoisson { law, .. } => law.is_symmetric(),
            Self::Custom(c) => (-80..=80).all(|j| {
                let a = 2f64.powf(j as f64 / 4.0);
                let (p, m) = (c.eval(a), c.eval(-a));
                (p - m).abs() <= 1e-12 * p.abs().max(m.abs())
            }),
        }
    }

    pub fn moment(&self, k: f64) -> Result<MomentReport, LevyError> {
        if k < 0.0 || k.is_nan() {
            return Err(LevyError::NegativeOrder(k));
        }
        let inf = f64::INFINITY;
        let report = match self {
            Self::Stable { alpha, scale } => {
                let c = stable_constant(*alpha, *scale);
                let m0 = if k > *alpha { 2.0 * c / (k - alpha) } else { inf };
                let mi = if k < *alpha { 2.0 * c / (alpha - k) } else { inf };
                MomentReport::new(k, m0, mi)
            }
            Self::VarianceGamma { lambda } => {
                let l = *lambda;
                let m0 = if k > 0.0 {
                    2.0 * l.powf(-k) * gamma_li(k, l)
                } else {
                    inf
                };
                let mi = if k > 0.0 {
                    2.0 * l.powf(-k) * gamma_ui(k, l)
                } else {
                    let q = |a: f64| (-l * a).exp() / a;
                    2.0 * graded_integral(1.0, 1.0 + 60.0 / l, 1.0 / l, &q)
                };
                MomentReport::new(k, m0, mi)
            }
            Self::CompoundPoisson { rate, law } => {
                let (a, b) = law.split_abs_moment(k);
                MomentReport::new(k, rate * a, rate * b)
            }
            Self::Custom(c) => custom_moment(c, k),
        };
        Ok(report)
    }

    /// Compensated jump part `g(w)`, closed form where available.
    pub fn jump_exponent(&self, w: f64) -> Result<Complex64, LevyError> {
        if w == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match self {
            Self::Stable { alpha, scale } => Ok(Complex64::new(-(scale * w.abs()).powf(*alpha), 0.0)),
            Self::VarianceGamma { lambda } => Ok(Complex64::new(-(w * w / (lambda * lambda)).ln_1p(), 0.0)),
            Self::CompoundPoisson { rate, law } => {
                let drift = Complex64::new(0.0, -w * law.inner_mean());
                Ok((law.cf(w) - 1.0 + drift) * *rate)
            }
            Self::Custom(c) => density_exponent(&|a| c.eval(a), w),
        }
    }

    /// Jump part by quadrature of the compensated integrand against the
    /// density; independent of the closed forms.
    pub fn jump_exponent_quadrature(&self, w: f64) -> Result<Complex64, LevyError> {
        if let Self::CompoundPoisson { .. } = self {
            return Err(invalid("compound-Poisson measures have no density"));
        }
        if w == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        density_exponent(&|a| self.density(a).expect("density family"), w)
    }
}

/// Sum of a positive shell series plus a geometric tail estimate, or
/// `INFINITY` when the local decay exponent extrapolates to a nonnegative
/// value or the partial sums blow past `1e12`.
fn shell_series(terms: &[f64]) -> f64 {
    let partial: f64 = terms.iter().sum();
    if !partial.is_finite() || partial > 1e12 {
        return f64::INFINITY;
    }
    let last_pos = terms.iter().rposition(|&t| t > 0.0);
    let Some(last) = last_pos else { return 0.0 };
    if last + 1 < terms.len() {
        // compactly supported in this direction
        return partial;
    }
    // slopes s_j = log2(t_{j+1} / t_j) over the second half, fitted as s_inf + c / j
    let n = terms.len();
    let pts: Vec<(f64, f64)> = (n / 2..n - 1)
        .filter(|&j| terms[j] > 0.0 && terms[j + 1] > 0.0)
        .map(|j| (1.0 / (j as f64 + 1.0), (terms[j + 1] / terms[j]).log2()))
        .collect();
    if pts.len() < 3 {
        return partial;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mx).powi(2), b + (p.0 - mx) * (p.1 - my))
    });
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let s_inf = my - slope * mx;
    if s_inf >= -1e-3 {
        return f64::INFINITY;
    }
    let s_end = (s_inf + slope / n as f64).min(-1e-3);
    let r = 2f64.powf(s_end);
    partial + terms[n - 1] * r / (1.0 - r)
}

const SHELLS: usize = 20;

fn custom_moment(c: &CustomDensity, k: f64) -> MomentReport {
    let q = |a: f64| a.powf(k) * (c.eval(a) + c.eval(-a));
    let outer: Vec<f64> = (0..SHELLS)
        .map(|j| {
            let lo = 2f64.powi(j as i32);
            quad::panels(lo, 2.0 * lo, 4, q)
        })
        .collect();
    let inner: Vec<f64> = (0..SHELLS)
        .map(|j| {
            let hi = 2f64.powi(-(j as i32));
            quad::panels(0.5 * hi, hi, 4, q)
        })
        .collect();
    MomentReport::new(k, shell_series(&inner), shell_series(&outer))
}

/// `sin x - x` without cancellation for small x.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut term = -x * x2 / 6.0;
        let mut acc = term;
        for n in 1..12 {
            let k = (2 * n + 2) as f64;
            term *= -x2 / (k * (k + 1.0));
            acc += term;
        }
        acc
    } else {
        x.sin() - x
    }
}

/// `e^{jx} - 1 - j x` with a Taylor form for tiny `|x|`.
fn compensated_kernel(x: f64) -> Complex64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        Complex64::new(-0.5 * x2 + x2 * x2 / 24.0, -x * x2 / 6.0)
    } else {
        let s = (0.5 * x).sin();
        Complex64::new(-2.0 * s * s, sin_minus_x(x))
    }
}

/// Sums complex shell contributions until they are negligible or decay
/// geometrically, then adds the geometric remainder.
fn geometric_shells(mut shell: impl FnMut(usize) -> Complex64, max: usize) -> Result<Complex64, LevyError> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut prev: Option<Complex64> = None;
    let mut prev_ratio: Option<Complex64> = None;
    let mut steady = 0;
    for j in 0..max {
        let s = shell(j);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(LevyError::Quadrature(format!("non-finite shell {j}")));
        }
        acc += s;
        if s.norm() <= 1e-17 * acc.norm() {
            return Ok(acc);
        }
        if let Some(p) = prev {
            if p.norm() > 0.0 {
                let r = s / p;
                if let Some(pr) = prev_ratio {
                    if (r - pr).norm() <= 1e-9 * r.norm() && r.norm() < 1.0 {
                        steady += 1;
                    } else {
                        steady = 0;
                    }
                }
                if steady >= 4 {
                    return Ok(acc + s * r / (1.0 - r));
                }
                prev_ratio = Some(r);
            }
        }
        prev = Some(s);
    }
    Err(LevyError::Quadrature(format!(
        "shell series did not settle in {max} shells"
    )))
}

/// Compensated jump integral against a density, split at `|a| = 1`.
fn density_exponent(v: &dyn Fn(f64) -> f64, w: f64) -> Result<Complex64, LevyError> {
    let mut total = Complex64::new(0.0, 0.0);
    for side in [1.0, -1.0] {
        let ws = side * w;
        let vs = |b: f64| v(side * b);
        // inner part (0, 1) on dyadic shells toward the origin
        let inner = geometric_shells(
            |j| {
                let hi = 0.5f64.powi(j as i32);
                quad::panel(0.5 * hi, hi, |b| compensated_kernel(b * ws) * vs(b))
            },
            1000,
        )?;
        // oscillatory outer part [1, A)
        let big_a = (4096.0 / w.abs()).max(2.0);
        let mut outer = Complex64::new(0.0, 0.0);
        let mut a = 1.0;
        let half_period = PI / w.abs();
        while a < big_a {
            let b = (a + half_period.min(0.25 * a)).min(big_a);
            outer += quad::panel(a, b, |t| (Complex64::from_polar(1.0, t * ws) - 1.0) * vs(t));
            a = b;
        }
        // tail: -int_A^inf v plus the asymptotic expansion of the oscillatory integral
        let mass = geometric_shells(
            |j| {
                let lo = big_a * 2f64.powi(j as i32);
                Complex64::new(quad::panels(lo, 2.0 * lo, 2, vs), 0.0)
            },
            1100,
        )?;
        let d = 1e-3 * big_a;
        let v0 = vs(big_a);
        let v1 = (vs(big_a + d) - vs(big_a - d)) / (2.0 * d);
        let v2 = (vs(big_a + d) - 2.0 * v0 + vs(big_a - d)) / (d * d);
        let jw = Complex64::new(0.0, ws);
        let phase = Complex64::from_polar(1.0, ws * big_a);
        let osc = phase * (-v0 / jw + v1 / (jw * jw) - v2 / (jw * jw * jw));
        total += inner + outer - mass + osc;
    }
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(LevyError::Quadrature("non-finite jump integral".into()));
    }
    Ok(total)
}

/// True iff the inner `q`-moment and the outer `p`-moment are finite.
pub fn in_class(v: &LevyMeasure, p: f64, q: f64) -> Result<bool, LevyError> {
    Ok(v.moment(q)?.mu_k0.is_finite() && v.moment(p)?.mu_k_inf.is_finite())
}

/// Largest `eps` in `{1, 1/2, ..., 2^-20}` with `V` in `M(eps, 2)`.
pub fn levy_schwartz_witness(v: &LevyMeasure) -> Result<Option<f64>, LevyError> {
    if !v.moment(2.0)?.mu_k0.is_finite() {
        return Ok(None);
    }
    for i in 0..=20 {
        let eps = 0.5f64.powi(i);
        if v.moment(eps)?.mu_k_inf.is_finite() {
            return Ok(Some(eps));
        }
    }
    Ok(None)
}

pub fn is_levy_schwartz(v: &LevyMeasure) -> Result<bool, LevyError> {
    Ok(levy_schwartz_witness(v)?.is_some())
}

/// Drift, Gaussian variance and optional jump measure.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyTriplet {
    pub mu: f64,
    pub sigma2: f64,
    pub v: Option<LevyMeasure>,
}

impl LevyTriplet {
    pub fn new(mu: f64, sigma2: f64, v: Option<LevyMeasure>) -> Result<Self, LevyError> {
        let t = Self { mu, sigma2, v };
        t.validate()?;
        Ok(t)
    }

    pub fn gaussian(mu: f64, sigma2: f64) -> Result<Self, LevyError> {
        Self::new(mu, sigma2, None)
    }

    pub fn stable(alpha: f64, scale: f64) -> Result<Self, LevyError> {
        Self::new(0.0, 0.0, Some(LevyMeasure::Stable { alpha, scale }))
    }

    pub fn variance_gamma(lambda: f64) -> Result<Self, LevyError> {
        Self::new(0.0, 0.0, Some(LevyMeasure::VarianceGamma { lambda }))
    }

    pub fn compound_poisson(rate: f64, law: ProbabilityLaw) -> Result<Self, LevyError> {
        Self::new(0.0, 0.0, Some(LevyMeasure::CompoundPoisson { rate, law }))
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        if !self.mu.is_finite() {
            return Err(invalid("drift must be finite"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(invalid(format!("sigma2 must be nonnegative, got {}", self.sigma2)));
        }
        if let Some(v) = &self.v {
            v.validate()?;
        }
        Ok(())
    }

    pub fn is_symmetric_measure(&self) -> bool {
        self.v.as_ref().is_none_or(|v| v.is_symmetric())
    }

    /// Jump part `g(w)`; zero without a measure.
    pub fn jump_exponent(&self, w: f64) -> Result<Complex64, LevyError> {
        match &self.v {
            Some(v) => v.jump_exponent(w),
            None => Ok(Complex64::new(0.0, 0.0)),
        }
    }

    /// `f(w) = j mu w - sigma2 w^2 / 2 + g(w)`.
    pub fn exponent(&self, w: f64) -> Result<Complex64, LevyError> {
        let gauss = Complex64::new(-0.5 * self.sigma2 * w * w, self.mu * w);
        Ok(gauss + self.jump_exponent(w)?)
    }
}

/// Pointwise Levy exponent of a triplet.
pub fn levy_exponent(t: &LevyTriplet, w: f64) -> Result<Complex64, LevyError> {
    t.exponent(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_minus_cos_matches_known_values() {
        assert!((one_minus_cos_integral(1.0) - PI / 2.0).abs() < 1e-15);
        // alpha = 1/2: Gamma(1/2) cos(pi/4) / (1/2) = sqrt(2 pi)
        assert!((one_minus_cos_integral(0.5) - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn uniform_split_moments() {
        let law = ProbabilityLaw::Uniform { lo: -2.0, hi: 2.0 };
        let (i, o) = law.split_abs_moment(1.0);
        assert!((i - 0.25).abs() < 1e-15);
        assert!((o - 0.75).abs() < 1e-15);
        assert!(law.is_symmetric());
    }

    #[test]
    fn sin_minus_x_series_matches_direct_for_moderate_x() {
        for x in [0.3f64, -0.45, 0.49] {
            assert!((sin_minus_x(x) - (x.sin() - x)).abs() < 1e-16);
        }
    }

    #[test]
    fn shell_series_power_law() {
        // terms 2^{-j}: sum to infinity is 2
        let terms: Vec<f64> = (0..20).map(|j| 0.5f64.powi(j)).collect();
        assert!((shell_series(&terms) - 2.0).abs() < 1e-12);
        let flat = vec![1.0; 20];
        assert!(shell_series(&flat).is_infinite());
    }
}
