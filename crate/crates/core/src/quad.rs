//! Fixed-order Gauss-Legendre panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the n-point rule on [-1, 1], by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn rule20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// 20-point Gauss-Legendre approximation of the integral of `f` over [a, b].
pub fn panel<T>(a: f64, b: f64, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let (x, w) = rule20();
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = T::default();
    for (xi, wi) in x.iter().zip(w) {
        acc = acc + f(c + r * xi) * (wi * r);
    }
    acc
}

/// Sum of `m` equal panels over [a, b].
pub fn panels<T>(a: f64, b: f64, m: usize, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let step = (b - a) / m as f64;
    let mut acc = T::default();
    for i in 0..m {
        let lo = a + step * i as f64;
        acc = acc + panel(lo, lo + step, &f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 20, 33] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // degree 39 is the limit of the 20-point rule
        let v: f64 = panel(0.0, 1.0, |x: f64| x.powi(39));
        assert!((v - 1.0 / 40.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrand() {
        let v: f64 = panels(0.0, PI, 4, |x: f64| x.sin());
        assert!((v - 2.0).abs() < 1e-14);
    }
}
