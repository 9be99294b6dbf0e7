//! Uniform d-dimensional grids and functions sampled on them.
//!
//! Values are stored in row-major order (last axis fastest). A grid carries
//! an origin index per axis; the sample at multi-index `i` sits at
//! `r = (i - origin) * h`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("grid spacing must be positive and finite, got {0}")]
    Spacing(f64),
    #[error("grid extent along axis {axis} must be at least 2, got {n}")]
    Extent { axis: usize, n: usize },
    #[error("origin index {origin} outside axis {axis} of length {n}")]
    Origin { axis: usize, origin: usize, n: usize },
    #[error("grids do not match")]
    Mismatch,
    #[error("value count {got} does not match grid size {want}")]
    Length { got: usize, want: usize },
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("samples do not decay at the grid boundary: max |boundary| = {found:e} > {tol:e}")]
    BoundaryDecay { found: f64, tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    h: f64,
    origin: Vec<usize>,
}

impl Grid {
    /// Grid with the origin at index `n / 2` on every axis.
    pub fn centered(shape: &[usize], h: f64) -> Result<Self, GridError> {
        let origin: Vec<usize> = shape.iter().map(|&n| n / 2).collect();
        Self::with_origin(shape, h, &origin)
    }

    pub fn with_origin(shape: &[usize], h: f64, origin: &[usize]) -> Result<Self, GridError> {
        let d = shape.len();
        if !(1..=3).contains(&d) || origin.len() != d {
            return Err(GridError::Dimension(d));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::Spacing(h));
        }
        for (axis, (&n, &o)) in shape.iter().zip(origin).enumerate() {
            if n < 2 {
                return Err(GridError::Extent { axis, n });
            }
            if o >= n {
                return Err(GridError::Origin { axis, origin: o, n });
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            h,
            origin: origin.to_vec(),
        })
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dims() as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        let d = self.dims();
        let mut s = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.dims()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Signed integer offset of a multi-index from the origin.
    pub fn offset(&self, flat: usize) -> [i64; 3] {
        let idx = self.unflatten(flat);
        let mut off = [0i64; 3];
        for a in 0..self.dims() {
            off[a] = idx[a] as i64 - self.origin[a] as i64;
        }
        off
    }

    /// Physical position of a sample; unused trailing axes are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let off = self.offset(flat);
        let mut r = [0.0; 3];
        for a in 0..self.dims() {
            r[a] = off[a] as f64 * self.h;
        }
        r
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.unflatten(flat);
        (0..self.dims()).any(|a| idx[a] == 0 || idx[a] + 1 == self.shape[a])
    }

    /// The same grid refined or coarsened to spacing `h`.
    pub fn with_spacing(&self, h: f64) -> Result<Self, GridError> {
        Self::with_origin(&self.shape, h, &self.origin)
    }
}

/// A function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type Field = Sampled<f64>;
pub type CField = Sampled<Complex64>;

impl<T: Copy> Sampled<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                got: values.len(),
                want: grid.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Sampled<U> {
        Sampled {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<U: Copy, V: Copy>(
        &self,
        other: &Sampled<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Sampled<V>, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Sampled {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Periodic shift by whole cells: `out(i) = self(i - shift)`.
    pub fn shifted(&self, shift: &[i64]) -> Self {
        let g = &self.grid;
        let mut values = self.values.clone();
        for (flat, v) in values.iter_mut().enumerate() {
            let idx = g.unflatten(flat);
            let mut src = [0usize; 3];
            for a in 0..g.dims() {
                let n = g.shape[a] as i64;
                src[a] = (idx[a] as i64 - shift[a]).rem_euclid(n) as usize;
            }
            *v = self.values[g.flatten(&src[..g.dims()])];
        }
        Self {
            grid: g.clone(),
            values,
        }
    }
}

/// Magnitude used for norms, shared by real and complex samples.
pub trait Magnitude: Copy {
    fn magnitude(self) -> f64;
}

impl Magnitude for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Magnitude for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

impl<T: Magnitude> Sampled<T> {
    /// `sum |v|^p h^d`, the p-th power of the quasi-norm.
    pub fn norm_pow(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.magnitude().powf(p)).sum();
        s * self.grid.cell_volume()
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.norm_pow(p).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.magnitude()).fold(0.0, f64::max)
    }

    pub fn boundary_max(&self) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.grid.is_boundary(i))
            .map(|i| self.values[i].magnitude())
            .fold(0.0, f64::max)
    }

    /// Rejects samples that do not vanish on the grid boundary, relative to
    /// the peak magnitude.
    pub fn require_decay(&self, rel_tol: f64) -> Result<(), GridError> {
        let tol = rel_tol * self.max_abs();
        let found = self.boundary_max();
        if found > tol {
            return Err(GridError::BoundaryDecay { found, tol });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.magnitude().is_finite()) {
            Some(i) => Err(GridError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn to_complex(&self) -> CField {
        self.map(|v| Complex64::new(v, 0.0))
    }

    /// Quadrature pairing `sum a b h^d`.
    pub fn dot(&self, other: &Field) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }
}

impl CField {
    pub fn re(&self) -> Field {
        self.map(|v| v.re)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Bilinear quadrature pairing `sum a b h^d` (no conjugation).
    pub fn dot(&self, other: &CField) -> Result<Complex64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch);
        }
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }
}
