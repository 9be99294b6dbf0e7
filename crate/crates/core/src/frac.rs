//! Fractional Laplacians, Riesz potentials and their moment-corrected
//! variants on periodic grids.
//!
//! The corrected potential `I_{g,k}` divides by `|w|^g` after removing the
//! Taylor polynomial of the transform at `w = 0` up to order `floor(g) - k`.
//! The exponent bookkeeping locates the `L^p` range of each `k`:
//! `p` lies in the range of index `k` iff
//! `floor(g - d (1 - 1/p)) = floor(g) - k`.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{CField, Field, GridError};
use crate::spectral::{self, Nyquist};

/// Relative boundary level below which inputs count as decayed.
pub const DECAY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("order must be positive and finite, got {0}")]
    Order(f64),
    #[error("dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("integer order {0} has no forbidden-set bookkeeping or corrected potential")]
    IntegerOrder(f64),
    #[error("correction index {k} outside 0..={max}")]
    Index { k: usize, max: usize },
    #[error("imaginary residue {0:e} after a real multiplier")]
    Residue(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracOrder {
    pub gamma: f64,
    pub d: usize,
    /// Fractional part `gamma - floor(gamma)`.
    pub eps: f64,
}

impl FracOrder {
    pub fn new(d: usize, gamma: f64) -> Result<Self, FracError> {
        if !(1..=3).contains(&d) {
            return Err(FracError::Dimension(d));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FracError::Order(gamma));
        }
        Ok(Self {
            gamma,
            d,
            eps: gamma - gamma.floor(),
        })
    }

    pub fn is_integer(&self) -> bool {
        self.eps == 0.0
    }

    pub fn floor(&self) -> usize {
        self.gamma.floor() as usize
    }

    /// Number of forbidden exponents, `min(floor(gamma) + 1, d)`.
    pub fn k_count(&self) -> usize {
        (self.floor() + 1).min(self.d)
    }

    fn require_fractional(&self) -> Result<(), FracError> {
        if self.is_integer() {
            return Err(FracError::IntegerOrder(self.gamma));
        }
        Ok(())
    }
}

/// Interval of exponents `p`, possibly open at either end. `hi = inf` with
/// `hi_closed` stands for `p = inf` being included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl PInterval {
    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_closed { p >= self.lo } else { p > self.lo };
        let below = if self.hi_closed { p <= self.hi } else { p < self.hi };
        above && below
    }
}

impl std::fmt::Display for PInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Forbidden exponents in `[1, inf]`, ascending: `d / (d - eps - j)` for
/// `j = 0..k_count`.
pub fn forbidden_set(d: usize, gamma: f64) -> Result<Vec<f64>, FracError> {
    let o = FracOrder::new(d, gamma)?;
    o.require_fractional()?;
    let df = d as f64;
    Ok((0..o.k_count()).map(|j| df / (df - o.eps - j as f64)).collect())
}

pub fn k_count(d: usize, gamma: f64) -> Result<usize, FracError> {
    let o = FracOrder::new(d, gamma)?;
    o.require_fractional()?;
    Ok(o.k_count())
}

/// The `k`-th interval of `[1, inf]` minus the forbidden set.
pub fn interval_for(d: usize, gamma: f64, k: usize) -> Result<PInterval, FracError> {
    let a = forbidden_set(d, gamma)?;
    let max = a.len();
    if k > max {
        return Err(FracError::Index { k, max });
    }
    let lo = if k == 0 { 1.0 } else { a[k - 1] };
    let hi = if k == max { f64::INFINITY } else { a[k] };
    Ok(PInterval {
        lo,
        hi,
        lo_closed: k == 0,
        hi_closed: k == max,
    })
}

/// Range of `I_{g,k}` over all `p > 0`. Index 0 continues below 1 down to
/// `d / (d + 1 - eps)`, where the `|r|^{-d-1+eps}` tail stops being
/// `p`-integrable.
pub fn range_interval(d: usize, gamma: f64, k: usize) -> Result<PInterval, FracError> {
    let mut c = interval_for(d, gamma, k)?;
    if k == 0 {
        let o = FracOrder::new(d, gamma)?;
        c.lo = d as f64 / (d as f64 + 1.0 - o.eps);
        c.lo_closed = false;
    }
    Ok(c)
}

/// Index `k` with `p` in [`range_interval`]`(d, gamma, k)`, or `None` when
/// `p` is forbidden or below every range.
pub fn correction_index(d: usize, gamma: f64, p: f64) -> Result<Option<usize>, FracError> {
    let o = FracOrder::new(d, gamma)?;
    o.require_fractional()?;
    if p.is_nan() || p <= 0.0 {
        return Ok(None);
    }
    let x = gamma - d as f64 * (1.0 - 1.0 / p);
    if x == x.floor() {
        return Ok(None);
    }
    let k = o.floor() as i64 - (x.floor() as i64).max(-1);
    if k < 0 || k as usize > o.k_count() {
        return Ok(None);
    }
    Ok(Some(k as usize))
}

/// Correction applied by `I_{g,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionPlan {
    pub order: FracOrder,
    pub k: usize,
    pub interval: PInterval,
    /// Multi-indices `j` with `|j| <= floor(g) - k` whose moments are removed.
    pub moments: Vec<[usize; 3]>,
}

impl CorrectionPlan {
    pub fn new(d: usize, gamma: f64, k: usize) -> Result<Self, FracError> {
        let order = FracOrder::new(d, gamma)?;
        // a fractional order never differs from d by an integer
        order.require_fractional()?;
        let interval = range_interval(d, gamma, k)?;
        let top = order.floor() as i64 - k as i64;
        let mut moments = Vec::new();
        if top >= 0 {
            let top = top as usize;
            let ext = |a: usize| if a < d { top } else { 0 };
            for j0 in 0..=ext(0) {
                for j1 in 0..=ext(1) {
                    for j2 in 0..=ext(2) {
                        if j0 + j1 + j2 <= top {
                            moments.push([j0, j1, j2]);
                        }
                    }
                }
            }
        }
        Ok(Self {
            order,
            k,
            interval,
            moments,
        })
    }
}

fn require_real(c: &CField, scale: f64) -> Result<Field, FracError> {
    let residue = c.max_imag();
    if residue > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(FracError::Residue(residue));
    }
    Ok(c.re())
}

/// `(-Delta)^{g/2}` as the periodic multiplier `|w|^g`.
pub fn frac_laplacian(phi: &Field, gamma: f64) -> Result<Field, FracError> {
    phi.check_finite()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(FracError::Order(gamma));
    }
    let out = spectral::apply_multiplier(&phi.to_complex(), Nyquist::Keep, |w| {
        Complex64::new(norm(w).powf(gamma), 0.0)
    });
    let scale = out.values().iter().map(|v| v.re.abs()).fold(phi.max_abs(), f64::max);
    require_real(&out, scale)
}

/// Plain periodic Riesz potential `|w|^{-g}` with the DC bin set to zero.
/// Defined for every `g > 0`, including integers.
pub fn riesz(phi: &Field, gamma: f64) -> Result<Field, FracError> {
    phi.check_finite()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(FracError::Order(gamma));
    }
    let out = spectral::apply_multiplier(&phi.to_complex(), Nyquist::Keep, |w| {
        let r = norm(w);
        Complex64::new(if r == 0.0 { 0.0 } else { r.powf(-gamma) }, 0.0)
    });
    let scale = out.values().iter().map(|v| v.re.abs()).fold(phi.max_abs(), f64::max);
    require_real(&out, scale)
}

/// Lattice moments `sum r^j phi(r) h^d` for each multi-index.
pub fn lattice_moments(phi: &Field, js: &[[usize; 3]]) -> Vec<f64> {
    let grid = phi.grid();
    let dv = grid.cell_volume();
    js.iter()
        .map(|j| {
            // terms in parallel, summed in index order so the result is schedule-free
            let terms: Vec<f64> = phi
                .values()
                .par_iter()
                .enumerate()
                .map(|(flat, &v)| {
                    let r = grid.position(flat);
                    v * (0..3).map(|a| r[a].powi(j[a] as i32)).product::<f64>()
                })
                .collect();
            terms.iter().sum::<f64>() * dv
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `I_{g,k} phi`. The input must decay at the boundary.
pub fn corrected_riesz(phi: &Field, gamma: f64, k: usize) -> Result<Field, FracError> {
    let grid = phi.grid().clone();
    let plan = CorrectionPlan::new(grid.dims(), gamma, k)?;
    phi.check_finite()?;
    phi.require_decay(DECAY_TOL)?;

    // Taylor coefficients (-i)^{|j|} m_j / j! of the transform at 0
    let m = lattice_moments(phi, &plan.moments);
    let coeffs: Vec<([usize; 3], Complex64)> = plan
        .moments
        .iter()
        .zip(&m)
        .map(|(j, &mj)| {
            let order = j[0] + j[1] + j[2];
            let fact = factorial(j[0]) * factorial(j[1]) * factorial(j[2]);
            (*j, Complex64::new(0.0, -1.0).powu(order as u32) * (mj / fact))
        })
        .collect();

    let h = grid.h();
    let dv = grid.cell_volume();
    let origin: Vec<f64> = grid.origin().iter().map(|&o| o as f64 * h).collect();
    let mut data = phi.to_complex().into_values();
    spectral::forward(&mut data, grid.shape());
    data.par_iter_mut().enumerate().for_each(|(flat, v)| {
        let w = spectral::bin_frequency(&grid, flat, Nyquist::Keep);
        let r = norm(w);
        if r == 0.0 {
            *v = Complex64::new(0.0, 0.0);
            return;
        }
        let mut poly = Complex64::new(0.0, 0.0);
        for (j, c) in &coeffs {
            poly += c * (0..3).map(|a| w[a].powi(j[a] as i32)).product::<f64>();
        }
        let phase: f64 = (0..grid.dims()).map(|a| w[a] * origin[a]).sum();
        let shifted = poly * Complex64::from_polar(1.0 / dv, -phase);
        *v = (*v - shifted) * r.powf(-gamma);
    });
    spectral::inverse(&mut data, grid.shape());
    Ok(CField::new(grid, data)?.re())
}

fn norm(w: [f64; 3]) -> f64 {
    (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
}
