//! Periodic Fourier multipliers on uniform grids.
//!
//! Frequencies follow the DFT layout: bin `k` on an axis of length `n`
//! maps to `2 pi k' / (n h)` with `k'` the signed index. The Nyquist bin of an
//! even-length axis has no sign; [`Nyquist`] selects how a multiplier sees it.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::grid::{CField, Grid};

/// Treatment of the unsigned Nyquist component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nyquist {
    /// Use `+pi/h`; right for even multipliers such as `|w|^g`.
    Keep,
    /// Use `0`; keeps odd multipliers Hermitian so real input stays real.
    Zero,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Signed angular frequency of bin `k` on an axis of `n` samples.
pub fn frequency(k: usize, n: usize, h: f64, nyq: Nyquist) -> f64 {
    let signed = if 2 * k < n {
        k as f64
    } else if 2 * k == n {
        match nyq {
            Nyquist::Keep => k as f64,
            Nyquist::Zero => 0.0,
        }
    } else {
        k as f64 - n as f64
    };
    2.0 * PI * signed / (n as f64 * h)
}

/// Frequency vector of a flat bin index; unused trailing axes are zero.
pub fn bin_frequency(grid: &Grid, flat: usize, nyq: Nyquist) -> [f64; 3] {
    let idx = grid.unflatten(flat);
    let mut w = [0.0; 3];
    for a in 0..grid.dims() {
        w[a] = frequency(idx[a], grid.shape()[a], grid.h(), nyq);
    }
    w
}

fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let block = n * stride;
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    if stride == 1 {
        data.par_chunks_mut(n).for_each(|line| fft.process(line));
        return;
    }
    data.par_chunks_mut(block).for_each(|blk| {
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for inner in 0..stride {
            for k in 0..n {
                line[k] = blk[k * stride + inner];
            }
            fft.process(&mut line);
            for k in 0..n {
                blk[k * stride + inner] = line[k];
            }
        }
    });
}

/// Unnormalised forward DFT over every axis.
pub fn forward(data: &mut [Complex64], shape: &[usize]) {
    for axis in 0..shape.len() {
        transform_axis(data, shape, axis, false);
    }
}

/// Inverse DFT over every axis, normalised by the sample count.
pub fn inverse(data: &mut [Complex64], shape: &[usize]) {
    for axis in 0..shape.len() {
        transform_axis(data, shape, axis, true);
    }
    let scale = 1.0 / data.len() as f64;
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Applies the multiplier `m(w)` in the periodic Fourier domain.
pub fn apply_multiplier<M>(f: &CField, nyq: Nyquist, m: M) -> CField
where
    M: Fn([f64; 3]) -> Complex64 + Sync,
{
    let grid = f.grid().clone();
    let mut data = f.values().to_vec();
    forward(&mut data, grid.shape());
    data.par_iter_mut().enumerate().for_each(|(flat, v)| {
        *v *= m(bin_frequency(&grid, flat, nyq));
    });
    inverse(&mut data, grid.shape());
    CField::new(grid, data).expect("length preserved")
}
