//! Directional derivatives `D_u - alpha Id` and their inverses.
//!
//! Directions are integer lattice vectors `n` with `u = n / |n|`. Stable
//! factors (`Re alpha != 0`) are inverted spectrally. Marginal factors
//! (`alpha = j w0`) are inverted by cumulative quadrature along the lattice
//! lines `r + t n h`, anchored at the hyperplane `<r, u> = 0`. On a line
//! the coordinate `<r, u>` is `m h / |n|` with the integer key
//! `m = <i - o, n>`, so the anchor test `<r, u> <= 0` is exact.
//!
//! Lines are padded with one virtual zero sample at each end. Integrals to
//! `+-inf` therefore stop one step beyond the grid, which is why the adjoint
//! operators require decayed input.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::frac::{self, FracError, DECAY_TOL};
use crate::grid::{CField, Field, Grid, GridError};
use crate::spectral::{self, Nyquist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error("direction must be a nonzero integer vector")]
    ZeroDirection,
    #[error("direction component {0} is not an integer")]
    NonLattice(f64),
    #[error("direction has {got} components, grid has {want} axes")]
    DirectionDims { got: usize, want: usize },
    #[error("stable inverse needs Re(alpha) != 0, got {0}")]
    Marginal(Complex64),
    #[error("the operator spec holds no factor")]
    EmptySpec,
}

/// Integer lattice direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Direction {
    n: [i64; 3],
    d: usize,
}

impl Direction {
    pub fn new(n: &[i64]) -> Result<Self, DirError> {
        if n.is_empty() || n.len() > 3 || n.iter().all(|&c| c == 0) {
            return Err(DirError::ZeroDirection);
        }
        let mut a = [0; 3];
        a[..n.len()].copy_from_slice(n);
        Ok(Self { n: a, d: n.len() })
    }

    /// Accepts real components only when they are integers.
    pub fn from_real(v: &[f64]) -> Result<Self, DirError> {
        let mut n = Vec::with_capacity(v.len());
        for &c in v {
            if !c.is_finite() || c != c.round() || c.abs() > 1e6 {
                return Err(DirError::NonLattice(c));
            }
            n.push(c as i64);
        }
        Self::new(&n)
    }

    pub fn axis(d: usize, a: usize) -> Self {
        let mut n = [0; 3];
        n[a] = 1;
        Self { n, d }
    }

    pub fn components(&self) -> &[i64] {
        &self.n[..self.d]
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    /// `|n|`.
    pub fn length(&self) -> f64 {
        (self.n.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
    }

    pub fn unit(&self) -> [f64; 3] {
        let l = self.length();
        self.n.map(|c| c as f64 / l)
    }

    fn check(&self, grid: &Grid) -> Result<(), DirError> {
        if self.d != grid.dims() {
            return Err(DirError::DirectionDims {
                got: self.d,
                want: grid.dims(),
            });
        }
        Ok(())
    }
}

/// `p_{u perp}(r)`.
pub fn project_perp(r: [f64; 3], u: [f64; 3]) -> [f64; 3] {
    let c: f64 = (0..3).map(|a| r[a] * u[a]).sum();
    [r[0] - c * u[0], r[1] - c * u[1], r[2] - c * u[2]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Stable,
    Marginal,
}

/// One factor `D_u - alpha Id`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirFactor {
    pub dir: Direction,
    pub alpha: Complex64,
}

impl DirFactor {
    pub fn new(dir: Direction, alpha: Complex64) -> Self {
        Self { dir, alpha }
    }

    pub fn marginal(dir: Direction, w0: f64) -> Self {
        Self {
            dir,
            alpha: Complex64::new(0.0, w0),
        }
    }

    pub fn kind(&self) -> FactorKind {
        if self.alpha.re == 0.0 {
            FactorKind::Marginal
        } else {
            FactorKind::Stable
        }
    }
}

/// Quadrature along lattice lines for marginal factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MarginalRule {
    /// Trapezoid sums with the anchor cell interpolated.
    #[default]
    Trapezoid,
    /// Anchored rectangle sums; `J*` is then the exact matrix transpose of
    /// the synthesis-side `J`.
    Rectangle,
}

/// Optional fractional-Laplacian factor. `k = None` picks the smallest
/// admissible correction index when one is needed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracFactor {
    pub gamma: f64,
    pub k: Option<usize>,
}

/// `L = (-Delta)^{g/2} F_1 ... F_n`, factors listed left to right.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorSpec {
    pub frac: Option<FracFactor>,
    pub factors: Vec<DirFactor>,
    pub rule: MarginalRule,
}

impl OperatorSpec {
    pub fn fractional(gamma: f64, k: Option<usize>) -> Self {
        Self {
            frac: Some(FracFactor { gamma, k }),
            ..Self::default()
        }
    }

    pub fn directional(factors: Vec<DirFactor>) -> Self {
        Self {
            factors,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.frac.is_none() && self.factors.is_empty()
    }

    pub fn has_marginal(&self) -> bool {
        self.factors.iter().any(|f| f.kind() == FactorKind::Marginal)
    }

    pub fn check(&self, grid: &Grid) -> Result<(), DirError> {
        for f in &self.factors {
            f.dir.check(grid)?;
        }
        Ok(())
    }
}

/// `D_u phi` as the multiplier `j <w, u>`.
pub fn directional_derivative(phi: &CField, dir: Direction) -> Result<CField, DirError> {
    dir.check(phi.grid())?;
    let u = dir.unit();
    Ok(spectral::apply_multiplier(phi, Nyquist::Zero, move |w| {
        Complex64::new(0.0, dot(w, u))
    }))
}

fn require_stable(alpha: Complex64) -> Result<(), DirError> {
    if alpha.re == 0.0 || !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(DirError::Marginal(alpha));
    }
    Ok(())
}

/// `I_{u,alpha}` as the multiplier `1 / (j <w, u> - alpha)`; causal for
/// `Re alpha < 0`, anti-causal for `Re alpha > 0`.
pub fn stable_inverse(phi: &CField, dir: Direction, alpha: Complex64) -> Result<CField, DirError> {
    dir.check(phi.grid())?;
    require_stable(alpha)?;
    let u = dir.unit();
    Ok(spectral::apply_multiplier(phi, Nyquist::Zero, move |w| {
        1.0 / (Complex64::new(0.0, dot(w, u)) - alpha)
    }))
}

/// Adjoint of [`stable_inverse`] under the bilinear pairing, the multiplier
/// `1 / (-j <w, u> - alpha)`.
pub fn stable_inverse_adjoint(phi: &CField, dir: Direction, alpha: Complex64) -> Result<CField, DirError> {
    dir.check(phi.grid())?;
    require_stable(alpha)?;
    let u = dir.unit();
    Ok(spectral::apply_multiplier(phi, Nyquist::Zero, move |w| {
        1.0 / (Complex64::new(0.0, -dot(w, u)) - alpha)
    }))
}

/// `M_{u,w0} phi = e^{j w0 <r, u>} phi`.
pub fn modulate(phi: &CField, dir: Direction, w0: f64) -> Result<CField, DirError> {
    dir.check(phi.grid())?;
    let grid = phi.grid().clone();
    let u = dir.unit();
    let vals = phi
        .values()
        .par_iter()
        .enumerate()
        .map(|(flat, &v)| v * Complex64::from_polar(1.0, w0 * dot(grid.position(flat), u)))
        .collect();
    Ok(CField::new(grid, vals)?)
}

/// Lattice lines of a grid along a direction, in traversal order.
#[derive(Clone, Debug)]
pub struct LatticeLines {
    /// Flat indices of each line.
    pub lines: Vec<Vec<usize>>,
    /// Key `m = <i - o, n>` of the first sample of each line.
    pub first_key: Vec<i64>,
    /// Key increment per step, `|n|^2`.
    pub key_step: i64,
    /// Step length `|n| h`.
    pub step: f64,
    /// `h / |n|`, the coordinate `<r, u>` per key unit.
    pub key_scale: f64,
}

impl LatticeLines {
    pub fn new(grid: &Grid, dir: Direction) -> Result<Self, DirError> {
        dir.check(grid)?;
        let d = grid.dims();
        let shape = grid.shape();
        let n = dir.n;
        let inside = |idx: &[i64; 3]| (0..d).all(|a| idx[a] >= 0 && (idx[a] as usize) < shape[a]);
        let mut lines = Vec::new();
        let mut first_key = Vec::new();
        for flat in 0..grid.len() {
            let i = grid.unflatten(flat);
            let mut prev = [0i64; 3];
            for a in 0..d {
                prev[a] = i[a] as i64 - n[a];
            }
            if inside(&prev) {
                continue;
            }
            let off = grid.offset(flat);
            first_key.push((0..d).map(|a| off[a] * n[a]).sum());
            let mut line = Vec::new();
            let mut cur = [i[0] as i64, i[1] as i64, i[2] as i64];
            while inside(&cur) {
                let idx: Vec<usize> = (0..d).map(|a| cur[a] as usize).collect();
                line.push(grid.flatten(&idx));
                for a in 0..d {
                    cur[a] += n[a];
                }
            }
            lines.push(line);
        }
        let len = dir.length();
        Ok(Self {
            lines,
            first_key,
            key_step: dir.n.iter().map(|c| c * c).sum(),
            step: len * grid.h(),
            key_scale: grid.h() / len,
        })
    }

    /// Applies `op(values, first_key) -> values` to every line.
    fn map<F>(&self, phi: &CField, op: F) -> CField
    where
        F: Fn(&[Complex64], i64) -> Vec<Complex64> + Sync,
    {
        let src = phi.values();
        let results: Vec<Vec<Complex64>> = self
            .lines
            .par_iter()
            .zip(&self.first_key)
            .map(|(line, &m0)| {
                let v: Vec<Complex64> = line.iter().map(|&i| src[i]).collect();
                op(&v, m0)
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
        for (line, vals) in self.lines.iter().zip(results) {
            for (&i, v) in line.iter().zip(vals) {
                out[i] = v;
            }
        }
        CField::new(phi.grid().clone(), out).expect("length preserved")
    }
}

/// Trapezoid sums on a line padded with a virtual zero at each end:
/// `c[k]` is the integral from the virtual start to padded sample `k`.
fn padded_cumulative(v: &[Complex64], s: f64) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(v.len() + 2);
    let zero = Complex64::new(0.0, 0.0);
    c.push(zero);
    let mut prev = zero;
    let mut acc = zero;
    for &x in v.iter().chain(std::iter::once(&zero)) {
        acc += 0.5 * s * (prev + x);
        c.push(acc);
        prev = x;
    }
    c
}

/// Integral from the virtual start to `<r, u> = 0`.
fn anchor_integral(v: &[Complex64], c: &[Complex64], lines: &LatticeLines, m0: i64) -> Complex64 {
    let s = lines.step;
    // padded sample 0 sits one step before the first real sample
    let key0 = m0 - lines.key_step;
    if key0 > 0 {
        return Complex64::new(0.0, 0.0);
    }
    let steps = (-key0) / lines.key_step;
    let last = (c.len() - 1) as i64;
    if steps >= last {
        return c[last as usize];
    }
    let a = steps as usize;
    let theta = ((-key0) - steps * lines.key_step) as f64 / lines.key_step as f64;
    let e = |k: usize| {
        if k == 0 || k > v.len() {
            Complex64::new(0.0, 0.0)
        } else {
            v[k - 1]
        }
    };
    let (ea, eb) = (e(a), e(a + 1));
    c[a] + s * (theta * ea + 0.5 * theta * theta * (eb - ea))
}

fn marginal_j0(lines: &LatticeLines, phi: &CField, rule: MarginalRule) -> CField {
    let s = lines.step;
    lines.map(phi, |v, m0| match rule {
        MarginalRule::Trapezoid => {
            let c = padded_cumulative(v, s);
            let star = anchor_integral(v, &c, lines, m0);
            (0..v.len()).map(|t| c[t + 1] - star).collect()
        }
        MarginalRule::Rectangle => {
            let t0 = last_nonpositive(lines, v.len(), m0);
            anchored_rectangle(v, t0, s)
        }
    })
}

fn marginal_j0_adjoint(lines: &LatticeLines, phi: &CField, rule: MarginalRule) -> CField {
    let s = lines.step;
    lines.map(phi, |v, m0| {
        let key = |t: usize| m0 + t as i64 * lines.key_step;
        match rule {
            MarginalRule::Trapezoid => {
                let c = padded_cumulative(v, s);
                let total = c[c.len() - 1];
                (0..v.len())
                    .map(|t| if key(t) <= 0 { -c[t + 1] } else { total - c[t + 1] })
                    .collect()
            }
            MarginalRule::Rectangle => {
                let t0 = last_nonpositive(lines, v.len(), m0);
                let n = v.len();
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                // t' <= t0: -s sum_{t < t'} v_t
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..n {
                    if (t as i64) <= t0 {
                        out[t] = -s * acc;
                    }
                    acc += v[t];
                }
                // t' > t0: s sum_{t >= t'} v_t
                let mut acc = Complex64::new(0.0, 0.0);
                for t in (0..n).rev() {
                    acc += v[t];
                    if (t as i64) > t0 {
                        out[t] = s * acc;
                    }
                }
                out
            }
        }
    })
}

/// Index of the last sample with key `m <= 0`, `-1` when there is none.
fn last_nonpositive(lines: &LatticeLines, n: usize, m0: i64) -> i64 {
    if m0 > 0 {
        return -1;
    }
    ((-m0) / lines.key_step).min(n as i64 - 1)
}

/// `S(t) = s sum_{t0 < t' <= t} v` above the anchor sample `t0`, `-s sum_{t < t' <= t0} v`
/// below it. The backward difference of `S` is exactly `s v`.
fn anchored_rectangle(v: &[Complex64], t0: i64, s: f64) -> Vec<Complex64> {
    let n = v.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = Complex64::new(0.0, 0.0);
    for t in ((t0 + 1).max(0) as usize)..n {
        acc += v[t];
        out[t] = s * acc;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    if t0 >= 0 {
        for t in (0..t0 as usize).rev() {
            acc += v[t + 1];
            out[t] = -s * acc;
        }
    }
    out
}

fn with_modulation<F>(phi: &CField, dir: Direction, w0: f64, inner: F) -> Result<CField, DirError>
where
    F: FnOnce(&CField) -> CField,
{
    if w0 == 0.0 {
        return Ok(inner(phi));
    }
    let pre = modulate(phi, dir, -w0)?;
    modulate(&inner(&pre), dir, w0)
}

/// `J_{u,w0} phi`, the right inverse of `D_u - j w0 Id` that vanishes on the
/// anchor hyperplane.
pub fn marginal_right_inverse(phi: &CField, dir: Direction, w0: f64, rule: MarginalRule) -> Result<CField, DirError> {
    let lines = LatticeLines::new(phi.grid(), dir)?;
    with_modulation(phi, dir, w0, |f| marginal_j0(&lines, f, rule))
}

/// `J*_{u,w0} phi`, the left inverse of `(D_u - j w0 Id)*`. Needs decayed input.
pub fn marginal_adjoint_left_inverse(
    phi: &CField,
    dir: Direction,
    w0: f64,
    rule: MarginalRule,
) -> Result<CField, DirError> {
    phi.require_decay(DECAY_TOL)?;
    let lines = LatticeLines::new(phi.grid(), dir)?;
    with_modulation(phi, dir, -w0, |f| marginal_j0_adjoint(&lines, f, rule))
}

/// `I_{u,j w0} phi`, the causal integral from `-inf` along each line.
pub fn marginal_causal(phi: &CField, dir: Direction, w0: f64) -> Result<CField, DirError> {
    phi.require_decay(DECAY_TOL)?;
    let lines = LatticeLines::new(phi.grid(), dir)?;
    let s = lines.step;
    with_modulation(phi, dir, w0, |f| {
        lines.map(f, |v, _| {
            let c = padded_cumulative(v, s);
            (0..v.len()).map(|t| c[t + 1]).collect()
        })
    })
}

/// `I*_{u,j w0} phi`, the integral to `+inf` along each line.
pub fn marginal_causal_adjoint(phi: &CField, dir: Direction, w0: f64) -> Result<CField, DirError> {
    phi.require_decay(DECAY_TOL)?;
    let lines = LatticeLines::new(phi.grid(), dir)?;
    let s = lines.step;
    with_modulation(phi, dir, -w0, |f| {
        lines.map(f, |v, _| {
            let c = padded_cumulative(v, s);
            let total = c[c.len() - 1];
            (0..v.len()).map(|t| total - c[t + 1]).collect()
        })
    })
}

/// `sup |phi(r)| (1 + |r|^a)` over the grid.
pub fn weighted_sup_norm(phi: &CField, a: f64) -> f64 {
    let grid = phi.grid();
    phi.values()
        .iter()
        .enumerate()
        .map(|(flat, v)| {
            let r = grid.position(flat);
            v.norm() * (1.0 + dot(r, r).sqrt().powf(a))
        })
        .fold(0.0, f64::max)
}

/// `C_a` with `|J* phi|_{inf, a-1} <= C_a |phi|_{inf, a}` for `a > 1`.
pub fn decay_constant(a: f64) -> f64 {
    2f64.powf(1.5) * a / (a - 1.0) * 2f64.powf(0.5 * (a - 1.0))
}

/// `L*^{-1} phi`: the adjoint inverse of `F_n` first, then down to `F_1`,
/// then the fractional factor.
pub fn compose_adjoint_left_inverse(spec: &OperatorSpec, phi: &CField) -> Result<CField, DirError> {
    if spec.is_empty() {
        return Err(DirError::EmptySpec);
    }
    spec.check(phi.grid())?;
    let mut cur = phi.clone();
    for f in spec.factors.iter().rev() {
        cur = match f.kind() {
            FactorKind::Stable => stable_inverse_adjoint(&cur, f.dir, f.alpha)?,
            FactorKind::Marginal => marginal_adjoint_left_inverse(&cur, f.dir, f.alpha.im, spec.rule)?,
        };
    }
    if let Some(fr) = spec.frac {
        cur = fractional_adjoint_inverse(&cur, fr)?;
    }
    Ok(cur)
}

/// Right-hand inverse used for synthesis: `F_1^{-1}` first, down to `F_n^{-1}`.
/// Marginal factors use anchored rectangle sums.
pub fn compose_right_inverse(spec: &OperatorSpec, w: &CField) -> Result<CField, DirError> {
    spec.check(w.grid())?;
    let mut cur = w.clone();
    if let Some(fr) = spec.frac {
        cur = split_real(&cur, |f| frac::riesz(f, fr.gamma))?;
    }
    for f in &spec.factors {
        cur = match f.kind() {
            FactorKind::Stable => stable_inverse(&cur, f.dir, f.alpha)?,
            FactorKind::Marginal => marginal_right_inverse(&cur, f.dir, f.alpha.im, MarginalRule::Rectangle)?,
        };
    }
    Ok(cur)
}

/// Correction index used for a fractional factor: the requested one, else 0.
pub fn frac_index(fr: FracFactor) -> usize {
    fr.k.unwrap_or(0)
}

fn fractional_adjoint_inverse(phi: &CField, fr: FracFactor) -> Result<CField, DirError> {
    if fr.gamma == fr.gamma.floor() {
        // integer orders only have the periodic DC-zeroed potential
        return split_real(phi, |f| frac::riesz(f, fr.gamma));
    }
    let k = frac_index(fr);
    split_real(phi, |f| frac::corrected_riesz(f, fr.gamma, k))
}

fn split_real<F>(phi: &CField, op: F) -> Result<CField, DirError>
where
    F: Fn(&Field) -> Result<Field, FracError>,
{
    let re = op(&phi.re())?;
    if phi.max_imag() == 0.0 {
        return Ok(re.to_complex());
    }
    let im_in = Field::new(phi.grid().clone(), phi.values().iter().map(|v| v.im).collect())?;
    let im = op(&im_in)?;
    let vals = re
        .values()
        .iter()
        .zip(im.values())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    Ok(CField::new(phi.grid().clone(), vals)?)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
