//! Validation: empirical against analytic characteristic functionals,
//! stationarity, and the compatibility certificate of a model `(t, L)`.
//!
//! A certificate picks orders `0 < p_min <= p_max <= 2` such that
//!
//! * `V` lies in `M(p_min, p_max)`,
//! * `p_min <= 1` when the drift is nonzero or `V` is asymmetric,
//! * `p_max = 2` when the Gaussian part is nonzero,
//! * the left inverse of `L*` maps into `L^{p_min} ∩ L^{p_max}`.
//!
//! For a fractional factor the last rule asks for both orders in the same
//! range interval of one correction index. Directional factors only need a
//! Levy-Schwartz measure.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::charfunc::{self, CharError};
use crate::dir::{self, DirError, MarginalRule, OperatorSpec};
use crate::frac::{self, FracError, PInterval};
use crate::grid::{Field, Grid, GridError};
use crate::levy::{self, LevyError, LevyMeasure, LevyTriplet};
use crate::synth::{self, SynthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Dir(#[from] DirError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("need at least 1000 realizations, got {0}")]
    TooFew(usize),
}

/// Rule of the compatibility conditions that failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bullet {
    /// Requested orders outside `0 < p <= q <= 2`.
    Orders,
    MeasureClass,
    DriftOrAsymmetry,
    Gaussian,
    OperatorRange,
}

impl std::fmt::Display for Bullet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bullet::Orders => "orders: need 0 < p_min <= p_max <= 2",
            Bullet::MeasureClass => "V in M(p_min, p_max)",
            Bullet::DriftOrAsymmetry => "p_min <= 1 if mu != 0 or V asymmetric",
            Bullet::Gaussian => "p_max = 2 if sigma2 != 0",
            Bullet::OperatorRange => "L*^-1 maps into L^p_min and L^p_max",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub p_min: f64,
    pub p_max: f64,
    /// Correction index of the fractional factor, when it has one.
    pub k: Option<usize>,
    /// Range interval holding both orders.
    pub range: Option<PInterval>,
    pub trail: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("rejected by [{bullet}]: {detail}")]
pub struct Rejection {
    pub bullet: Bullet,
    pub detail: String,
    pub trail: Vec<String>,
}

fn span(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> PInterval {
    PInterval {
        lo,
        hi,
        lo_closed,
        hi_closed,
    }
}

fn is_empty(a: &PInterval) -> bool {
    a.lo > a.hi || (a.lo == a.hi && !(a.lo_closed && a.hi_closed))
}

fn intersect(a: &PInterval, b: &PInterval) -> Option<PInterval> {
    let (lo, lo_closed) = if a.lo > b.lo {
        (a.lo, a.lo_closed)
    } else if b.lo > a.lo {
        (b.lo, b.lo_closed)
    } else {
        (a.lo, a.lo_closed && b.lo_closed)
    };
    let (hi, hi_closed) = if a.hi < b.hi {
        (a.hi, a.hi_closed)
    } else if b.hi < a.hi {
        (b.hi, b.hi_closed)
    } else {
        (a.hi, a.hi_closed && b.hi_closed)
    };
    let c = span(lo, hi, lo_closed, hi_closed);
    (!is_empty(&c)).then_some(c)
}

/// Closed upper end if present, else the midpoint.
fn pick_high(a: &PInterval) -> f64 {
    if a.hi_closed {
        a.hi
    } else {
        0.5 * (a.lo + a.hi)
    }
}

/// Closed lower end if present, else the midpoint.
fn pick_low(a: &PInterval) -> f64 {
    if a.lo_closed {
        a.lo
    } else {
        0.5 * (a.lo + a.hi)
    }
}

/// Orders `p` with `mu_p^inf < inf` and `q` with `mu_q^0 < inf`, within `(0, 2]`.
fn moment_windows(v: Option<&LevyMeasure>) -> Result<(PInterval, PInterval), LevyError> {
    let all = span(0.0, 2.0, false, true);
    match v {
        None | Some(LevyMeasure::VarianceGamma { .. }) | Some(LevyMeasure::CompoundPoisson { .. }) => Ok((all, all)),
        Some(LevyMeasure::Stable { alpha, .. }) => {
            Ok((span(0.0, *alpha, false, false), span(*alpha, 2.0, false, true)))
        }
        Some(m @ LevyMeasure::Custom(_)) => {
            // both windows are monotone in the order; scan on a 1/100 lattice
            let mut p_top = None;
            let mut q_bot = None;
            for i in 1..=200 {
                let p = i as f64 / 100.0;
                let r = m.moment(p)?;
                if r.mu_k_inf.is_finite() {
                    p_top = Some(p);
                }
                if q_bot.is_none() && r.mu_k0.is_finite() {
                    q_bot = Some(p);
                }
            }
            let p = p_top.map_or(span(1.0, 0.0, false, false), |t| span(0.0, t, false, true));
            let q = q_bot.map_or(span(1.0, 0.0, false, false), |b| span(b, 2.0, true, true));
            Ok((p, q))
        }
    }
}

fn rejection(bullet: Bullet, detail: impl Into<String>, trail: &[String]) -> Rejection {
    Rejection {
        bullet,
        detail: detail.into(),
        trail: trail.to_vec(),
    }
}

/// Certificate for the model `L s = w` with `w` of triplet `t` in dimension
/// `d`. `requested` pins `(p_min, p_max)`; otherwise feasible orders are chosen.
pub fn compatibility_certificate(
    t: &LevyTriplet,
    spec: &OperatorSpec,
    d: usize,
    requested: Option<(f64, f64)>,
) -> Result<Certificate, Rejection> {
    let mut trail = Vec::new();
    let fail_levy = |e: LevyError, trail: &[String]| rejection(Bullet::MeasureClass, e.to_string(), trail);
    t.validate().map_err(|e| fail_levy(e, &trail))?;
    let v = t.v.as_ref();
    let needs_low = t.mu != 0.0 || !t.is_symmetric_measure();
    let needs_two = t.sigma2 != 0.0;

    let frac = match spec.frac {
        Some(fr) if fr.gamma == fr.gamma.floor() => {
            trail.push(format!(
                "integer order {}: periodic DC-zeroed potential, no L^p range bookkeeping",
                fr.gamma
            ));
            None
        }
        other => other,
    };
    // candidate (k, range) pairs; `None` means no fractional range constraint
    let ranges: Vec<Option<(usize, PInterval)>> = match frac {
        None => vec![None],
        Some(fr) => {
            let kmax =
                frac::k_count(d, fr.gamma).map_err(|e| rejection(Bullet::OperatorRange, e.to_string(), &trail))?;
            let ks: Vec<usize> = match fr.k {
                Some(k) => vec![k],
                None => (0..=kmax).collect(),
            };
            let mut out = Vec::new();
            for k in ks {
                let r = frac::range_interval(d, fr.gamma, k)
                    .map_err(|e| rejection(Bullet::OperatorRange, e.to_string(), &trail))?;
                out.push(Some((k, r)));
            }
            out
        }
    };
    if let (None, Some(v)) = (frac, v) {
        let w = levy::levy_schwartz_witness(v).map_err(|e| fail_levy(e, &trail))?;
        match w {
            Some(eps) => trail.push(format!("V is Levy-Schwartz (moment of order {eps} finite at infinity)")),
            None => {
                return Err(rejection(
                    Bullet::OperatorRange,
                    "directional inverse needs a Levy-Schwartz measure",
                    &trail,
                ))
            }
        }
    }

    let (p, q, chosen) = match requested {
        Some((p, q)) => {
            if !(p > 0.0 && p <= q && q <= 2.0) {
                return Err(rejection(Bullet::Orders, format!("requested ({p}, {q})"), &trail));
            }
            trail.push(format!("requested orders p_min = {p}, p_max = {q}"));
            if let Some(v) = v {
                if !levy::in_class(v, p, q).map_err(|e| fail_levy(e, &trail))? {
                    return Err(rejection(Bullet::MeasureClass, format!("V not in M({p}, {q})"), &trail));
                }
            }
            if needs_low && p > 1.0 {
                return Err(rejection(Bullet::DriftOrAsymmetry, format!("p_min = {p} > 1"), &trail));
            }
            if needs_two && q != 2.0 {
                return Err(rejection(Bullet::Gaussian, format!("p_max = {q} != 2"), &trail));
            }
            let chosen = ranges
                .iter()
                .find(|r| r.is_none_or(|(_, i)| i.contains(p) && i.contains(q)))
                .copied();
            match chosen {
                Some(c) => (p, q, c),
                None => {
                    return Err(rejection(
                        Bullet::OperatorRange,
                        format!("p_min = {p} and p_max = {q} share no range interval"),
                        &trail,
                    ))
                }
            }
        }
        None => {
            let (mut pw, mut qw) = moment_windows(v).map_err(|e| fail_levy(e, &trail))?;
            trail.push(format!("moment windows: p_min in {pw}, p_max in {qw}"));
            if is_empty(&pw) || is_empty(&qw) || pw.lo >= qw.hi {
                return Err(rejection(Bullet::MeasureClass, "no orders with finite moments", &trail));
            }
            if needs_low {
                pw = intersect(&pw, &span(0.0, 1.0, false, true))
                    .ok_or_else(|| rejection(Bullet::DriftOrAsymmetry, "no admissible p_min <= 1", &trail))?;
                trail.push(format!("drift or asymmetry: p_min in {pw}"));
            }
            if needs_two {
                qw = intersect(&qw, &span(2.0, 2.0, true, true))
                    .ok_or_else(|| rejection(Bullet::Gaussian, "p_max = 2 lies outside the moment window", &trail))?;
                trail.push("Gaussian part: p_max = 2".to_string());
            }
            let mut found = None;
            for r in &ranges {
                let (pr, qr) = match r {
                    None => (Some(pw), Some(qw)),
                    Some((_, i)) => (intersect(&pw, i), intersect(&qw, i)),
                };
                let (Some(pr), Some(qr)) = (pr, qr) else { continue };
                let p = pick_high(&pr);
                let Some(qr) = intersect(&qr, &span(p, 2.0, true, true)) else {
                    continue;
                };
                found = Some((p, pick_low(&qr), *r));
                break;
            }
            match found {
                Some(f) => f,
                None => {
                    let desc: Vec<String> = ranges.iter().flatten().map(|(k, i)| format!("k = {k}: {i}")).collect();
                    return Err(rejection(
                        Bullet::OperatorRange,
                        format!(
                            "no range interval meets p_min in {pw} and p_max in {qw} ({})",
                            desc.join(", ")
                        ),
                        &trail,
                    ));
                }
            }
        }
    };

    // second route: the moment integrals themselves
    if let Some(v) = v {
        let ok = levy::in_class(v, p, q).map_err(|e| fail_levy(e, &trail))?;
        if !ok {
            return Err(rejection(Bullet::MeasureClass, format!("V not in M({p}, {q})"), &trail));
        }
    }
    trail.push(format!("V in M({p}, {q})"));
    if let Some((k, i)) = chosen {
        trail.push(format!("fractional range k = {k}: {i}"));
    }
    Ok(Certificate {
        p_min: p,
        p_max: q,
        k: chosen.map(|c| c.0),
        range: chosen.map(|c| c.1),
        trail,
    })
}

/// `L*^{-1} phi` with `L` given by `spec`, or `phi` itself for the innovation.
/// Marginal factors use the rectangle rule so that the analysis side is the
/// exact transpose of synthesis.
pub fn analysis_function(spec: Option<&OperatorSpec>, phi: &Field) -> Result<Field, ValidError> {
    let Some(spec) = spec else { return Ok(phi.clone()) };
    let spec = OperatorSpec {
        rule: MarginalRule::Rectangle,
        ..spec.clone()
    };
    let out = dir::compose_adjoint_left_inverse(&spec, &phi.to_complex())?;
    Ok(out.re())
}

/// `exp(F(L*^{-1} phi))`.
pub fn analytic_cf(t: &LevyTriplet, spec: Option<&OperatorSpec>, phi: &Field) -> Result<Complex64, ValidError> {
    Ok(charfunc::characteristic_functional(t, &analysis_function(spec, phi)?)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EcfRow {
    pub empirical: Complex64,
    pub analytic: Complex64,
    pub diff: f64,
    pub tol: f64,
}

impl EcfRow {
    pub fn passed(&self) -> bool {
        self.diff <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcfReport {
    pub n: usize,
    pub rows: Vec<EcfRow>,
}

impl EcfReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(EcfRow::passed)
    }

    pub fn max_diff(&self) -> f64 {
        self.rows.iter().map(|r| r.diff).fold(0.0, f64::max)
    }
}

/// Pairings `<s_r, phi> = sum s phi h^d` for realizations `0..n`, in order.
pub fn pairings(
    t: &LevyTriplet,
    spec: Option<&OperatorSpec>,
    grid: &Grid,
    phis: &[Field],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, ValidError> {
    let spec = match spec {
        Some(s) => Some(synth::certify(t, s, grid.dims())?.0),
        None => None,
    };
    (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let cells = synth::innovation_cells(t, grid, seed, r)?;
            let s = match &spec {
                Some(spec) => synth::invert(spec, &cells)?,
                None => cells.scaled(1.0 / grid.cell_volume()),
            };
            phis.iter().map(|phi| Ok(s.dot(phi)?)).collect()
        })
        .collect()
}

/// Compares `(1/N) sum_r e^{j <s_r, phi>}` with `exp(F(L*^{-1} phi))`; a row
/// passes within `3 / sqrt(N) + allowance`.
pub fn ecf_vs_analytic(
    t: &LevyTriplet,
    spec: Option<&OperatorSpec>,
    grid: &Grid,
    phis: &[Field],
    n: usize,
    seed: u64,
    allowance: f64,
) -> Result<EcfReport, ValidError> {
    if n < 1000 {
        return Err(ValidError::TooFew(n));
    }
    let certified = match spec {
        Some(s) => Some(synth::certify(t, s, grid.dims())?.0),
        None => None,
    };
    let pair = pairings(t, certified.as_ref(), grid, phis, n, seed)?;
    let tol = 3.0 / (n as f64).sqrt() + allowance;
    let mut rows = Vec::with_capacity(phis.len());
    for (j, phi) in phis.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in &pair {
            acc += Complex64::from_polar(1.0, p[j]);
        }
        let empirical = acc / n as f64;
        let analytic = analytic_cf(t, certified.as_ref(), phi)?;
        rows.push(EcfRow {
            empirical,
            analytic,
            diff: (empirical - analytic).norm(),
            tol,
        });
    }
    Ok(EcfReport { n, rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarityReport {
    pub cf: Complex64,
    pub cf_shifted: Complex64,
    pub diff: f64,
}

impl StationarityReport {
    pub fn stationary(&self, tol: f64) -> bool {
        self.diff <= tol
    }
}

/// Analytic characteristic functional at `phi` and at `phi` shifted by whole cells.
pub fn stationarity_test(
    t: &LevyTriplet,
    spec: Option<&OperatorSpec>,
    phi: &Field,
    shift: &[i64],
) -> Result<StationarityReport, ValidError> {
    let cf = analytic_cf(t, spec, phi)?;
    let cf_shifted = analytic_cf(t, spec, &phi.shifted(shift))?;
    Ok(StationarityReport {
        cf,
        cf_shifted,
        diff: (cf - cf_shifted).norm(),
    })
}

/// Excess kurtosis `m4 / m2^2 - 3`; zero for Gaussian samples.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = (v - mean).powi(2);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    m4 / (m2 * m2) - 3.0
}

impl From<FracError> for ValidError {
    fn from(e: FracError) -> Self {
        ValidError::Dir(DirError::Frac(e))
    }
}
