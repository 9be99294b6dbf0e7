//! Slow reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use sparsefield::grid::{CField, Field, Grid};

pub fn bump(grid: &Grid, c: [f64; 3], s: f64, amp: f64) -> Field {
    Field::from_fn(grid, |r| {
        let d2: f64 = (0..grid.dims()).map(|k| (r[k] - c[k]).powi(2)).sum();
        amp * (-d2 / (2.0 * s * s)).exp()
    })
}

pub fn max_diff(a: &CField, b: &CField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Walks one lattice line through `start` (which must have no predecessor).
fn walk(grid: &Grid, start: [i64; 3], n: &[i64]) -> Vec<usize> {
    let d = grid.dims();
    let mut cur = start;
    let mut out = Vec::new();
    loop {
        if (0..d).any(|a| cur[a] < 0 || cur[a] >= grid.shape()[a] as i64) {
            return out;
        }
        let idx: Vec<usize> = (0..d).map(|a| cur[a] as usize).collect();
        out.push(grid.flatten(&idx));
        for a in 0..d {
            cur[a] += n[a];
        }
    }
}

/// Every lattice line along `n` with its samples' `<r, u>` coordinates.
pub fn lines(grid: &Grid, n: &[i64]) -> Vec<(Vec<usize>, Vec<f64>)> {
    let d = grid.dims();
    let len = n.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for flat in 0..grid.len() {
        let i = grid.unflatten(flat);
        let prev_inside = (0..d).all(|a| {
            let p = i[a] as i64 - n[a];
            p >= 0 && p < grid.shape()[a] as i64
        });
        if prev_inside {
            continue;
        }
        let line = walk(grid, [i[0] as i64, i[1] as i64, i[2] as i64], n);
        let tau = line
            .iter()
            .map(|&f| {
                let r = grid.position(f);
                (0..d).map(|a| r[a] * n[a] as f64).sum::<f64>() / len
            })
            .collect();
        out.push((line, tau));
    }
    out
}

/// Direct trapezoid recursions for `I_{u,j w0}`, `I*`, `J` and `J*` with the
/// modulation kept inside the kernel `e^{j w0 (tau - tau')}`.
pub struct DirectMarginal {
    pub i: CField,
    pub i_adj: CField,
    pub j: CField,
    pub j_adj: CField,
}

pub fn direct_marginal(phi: &CField, n: &[i64], w0: f64, h: f64) -> DirectMarginal {
    let grid = phi.grid().clone();
    let len = n.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let s = len * h;
    let rot = Complex64::from_polar(1.0, w0 * s);
    let zero = Complex64::new(0.0, 0.0);
    let mut i_out = vec![zero; grid.len()];
    let mut ia_out = vec![zero; grid.len()];
    let mut j_out = vec![zero; grid.len()];
    let mut ja_out = vec![zero; grid.len()];
    for (line, tau) in lines(&grid, n) {
        let l = line.len();
        // padded values with virtual zeros
        let mut v = vec![zero];
        v.extend(line.iter().map(|&f| phi.values()[f]));
        v.push(zero);
        let tau0 = tau[0] - s;
        let tp = |k: usize| tau0 + k as f64 * s;
        // forward: y_k = int_{tau0}^{tau_k} e^{j w0 (tau_k - t)} phi(t) dt
        let mut y = vec![zero; l + 2];
        for k in 0..l + 1 {
            y[k + 1] = rot * y[k] + 0.5 * s * (rot * v[k] + v[k + 1]);
        }
        // backward: z_k = int_{tau_k}^{end} e^{j w0 (t - tau_k)} phi(t) dt
        let mut z = vec![zero; l + 2];
        for k in (0..l + 1).rev() {
            z[k] = rot * z[k + 1] + 0.5 * s * (v[k] + rot * v[k + 1]);
        }
        // anchor integral int_{tau0}^{0} e^{-j w0 t} phi(t) dt with the integrand interpolated linearly
        let g = |k: usize| Complex64::from_polar(1.0, -w0 * tp(k)) * v[k];
        let mut anchor = zero;
        let mut k = 0;
        while k + 1 < l + 2 && tp(k + 1) <= 1e-12 * s {
            anchor += 0.5 * s * (g(k) + g(k + 1));
            k += 1;
        }
        if k + 1 < l + 2 && tp(k) < 0.0 {
            let theta = -tp(k) / s;
            anchor += s * (theta * g(k) + 0.5 * theta * theta * (g(k + 1) - g(k)));
        }
        let full = z[0] * Complex64::from_polar(1.0, w0 * tau0);
        for (t, &f) in line.iter().enumerate() {
            let k = t + 1;
            i_out[f] = y[k];
            ia_out[f] = z[k];
            j_out[f] = y[k] - Complex64::from_polar(1.0, w0 * tp(k)) * anchor;
            let on_or_below = tau[t] <= 1e-12 * s;
            ja_out[f] = if on_or_below {
                z[k] - Complex64::from_polar(1.0, -w0 * tp(k)) * full
            } else {
                z[k]
            };
        }
    }
    let mk = |v| CField::new(grid.clone(), v).unwrap();
    DirectMarginal {
        i: mk(i_out),
        i_adj: mk(ia_out),
        j: mk(j_out),
        j_adj: mk(ja_out),
    }
}

/// Trapezoid recursion for `y' - a y = phi` on a 1-D grid, causal (`Re a < 0`).
pub fn recursive_filter(phi: &[f64], a: f64, h: f64) -> Vec<f64> {
    let e = (a * h).exp();
    let mut y = vec![0.0; phi.len()];
    for t in 1..phi.len() {
        y[t] = e * y[t - 1] + 0.5 * h * (e * phi[t - 1] + phi[t]);
    }
    y
}

pub mod marginal {
    //! Convergence probes for the marginal inverses on `[-2, 2]^2` along
    //! the lattice direction `(2, 1)`.
    use super::*;
    use sparsefield::dir::{self, Direction, MarginalRule};

    pub const N: [i64; 2] = [2, 1];
    pub const CENTER: [f64; 3] = [0.1, -0.05, 0.0];
    pub const SIGMA: f64 = 0.2;

    pub fn grid(h: f64) -> Grid {
        let n = (4.0 / h).round() as usize;
        Grid::centered(&[n, n], h).unwrap()
    }

    pub fn direction() -> Direction {
        Direction::new(&N).unwrap()
    }

    pub fn probe(g: &Grid) -> CField {
        bump(g, CENTER, SIGMA, 1.0).to_complex()
    }

    /// `(D_u - j w0)* phi = -D_u phi - j w0 phi` for the probe bump.
    pub fn probe_adjoint_derivative(g: &Grid, w0: f64) -> CField {
        let u = direction().unit();
        let phi = probe(g);
        let vals = (0..g.len())
            .map(|f| {
                let r = g.position(f);
                let proj: f64 = (0..2).map(|a| (r[a] - CENTER[a]) * u[a]).sum();
                let p = phi.values()[f];
                p * (proj / (SIGMA * SIGMA)) - Complex64::new(0.0, w0) * p
            })
            .collect();
        CField::new(g.clone(), vals).unwrap()
    }

    /// `max |(D_u - j w0) J phi - phi|` with centered differences along the line.
    pub fn right_inverse_error(h: f64, w0: f64, rule: MarginalRule) -> f64 {
        let g = grid(h);
        let phi = probe(&g);
        let j = dir::marginal_right_inverse(&phi, direction(), w0, rule).unwrap();
        let s = direction().length() * h;
        let shape = g.shape();
        let mut worst: f64 = 0.0;
        for f in 0..g.len() {
            let i = g.unflatten(f);
            let fwd = [i[0] as i64 + N[0], i[1] as i64 + N[1]];
            let bwd = [i[0] as i64 - N[0], i[1] as i64 - N[1]];
            let ok = |p: [i64; 2]| (0..2).all(|a| p[a] >= 0 && (p[a] as usize) < shape[a]);
            if !ok(fwd) || !ok(bwd) {
                continue;
            }
            let at = |p: [i64; 2]| j.values()[g.flatten(&[p[0] as usize, p[1] as usize])];
            let d = (at(fwd) - at(bwd)) / (2.0 * s);
            let res = d - Complex64::new(0.0, w0) * j.values()[f] - phi.values()[f];
            worst = worst.max(res.norm());
        }
        worst
    }

    /// `max |J* (D_u - j w0)* phi - phi|`.
    pub fn left_inverse_error(h: f64, w0: f64, rule: MarginalRule) -> f64 {
        let g = grid(h);
        let dphi = probe_adjoint_derivative(&g, w0);
        let back = dir::marginal_adjoint_left_inverse(&dphi, direction(), w0, rule).unwrap();
        max_diff(&back, &probe(&g))
    }

    /// `|<J phi, psi> - <phi, J* psi>| / (|phi|_2 |psi|_2)`.
    pub fn adjoint_error(h: f64, w0: f64, rule: MarginalRule) -> f64 {
        let g = grid(h);
        let phi = probe(&g);
        let psi = bump(&g, [-0.15, 0.2, 0.0], 0.2, 1.0).to_complex();
        let jphi = dir::marginal_right_inverse(&phi, direction(), w0, rule).unwrap();
        let jpsi = dir::marginal_adjoint_left_inverse(&psi, direction(), w0, rule).unwrap();
        let lhs = jphi.dot(&psi).unwrap();
        let rhs = phi.dot(&jpsi).unwrap();
        (lhs - rhs).norm() / (phi.norm(2.0) * psi.norm(2.0))
    }

    /// Observed orders `log2(e_k / e_{k+1})` for successive halvings.
    pub fn orders(errs: &[f64]) -> Vec<f64> {
        errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }
}
