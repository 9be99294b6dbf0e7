use std::f64::consts::{E, PI};

use proptest::prelude::*;
use sparsefield::levy::{
    in_class, is_levy_schwartz, levy_exponent, levy_schwartz_witness, one_minus_cos_integral, CustomDensity, LevyError,
    LevyMeasure, LevyTriplet, ProbabilityLaw,
};

fn stable(alpha: f64) -> LevyMeasure {
    LevyMeasure::Stable { alpha, scale: 1.0 }
}

/// Plain composite midpoint rule, the slow oracle for smooth integrals.
fn midpoint(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn stable_moments_diverge_at_alpha() {
    let m = stable(1.5).moment(1.5).unwrap();
    assert!(m.mu_k0.is_infinite() && m.mu_k_inf.is_infinite());
    let below = stable(1.5).moment(1.0).unwrap();
    assert!(below.mu_k0.is_infinite() && below.mu_k_inf.is_finite());
    let above = stable(1.5).moment(2.0).unwrap();
    assert!(above.mu_k0.is_finite() && above.mu_k_inf.is_infinite());
}

#[test]
fn poisson_point_mass_moment() {
    let v = LevyMeasure::CompoundPoisson {
        rate: 2.0,
        law: ProbabilityLaw::Dirac { a0: 3.0 },
    };
    let m = v.moment(2.0).unwrap();
    assert_eq!(m.mu_k0, 0.0);
    assert_eq!(m.mu_k_inf, 18.0);
    assert_eq!(m.mu_k, 18.0);
}

#[test]
fn variance_gamma_first_moment_against_riemann_sum() {
    // two-sided density e^{-|a|}/|a|: each side contributes e^{-1} outside and 1 - e^{-1} inside
    let m = LevyMeasure::VarianceGamma { lambda: 1.0 }.moment(1.0).unwrap();
    let outer_oracle = 2.0 * midpoint(1.0, 60.0, 2_000_000, |a| (-a).exp());
    let inner_oracle = 2.0 * midpoint(0.0, 1.0, 1_000_000, |a| (-a).exp());
    assert!((m.mu_k_inf - outer_oracle).abs() < 1e-9);
    assert!((m.mu_k0 - inner_oracle).abs() < 1e-9);
    assert!((m.mu_k_inf - 2.0 / E).abs() < 1e-12);
    assert!((m.mu_k0 - 2.0 * (1.0 - 1.0 / E)).abs() < 1e-12);
}

#[test]
fn negative_moment_order_rejected() {
    assert!(matches!(stable(1.0).moment(-0.5), Err(LevyError::NegativeOrder(_))));
}

#[test]
fn class_membership_examples() {
    assert!(in_class(&stable(1.0), 0.9, 1.1).unwrap());
    assert!(!in_class(&stable(1.0), 1.0, 1.0).unwrap());
    let vg = LevyMeasure::VarianceGamma { lambda: 2.0 };
    assert!(in_class(&vg, 10.0, 0.01).unwrap());
}

#[test]
fn levy_schwartz_witnesses() {
    assert_eq!(
        levy_schwartz_witness(&LevyMeasure::Stable { alpha: 0.5, scale: 1.0 }).unwrap(),
        Some(0.25)
    );
    let cp = LevyMeasure::CompoundPoisson {
        rate: 1.0,
        law: ProbabilityLaw::Uniform { lo: -1.0, hi: 1.0 },
    };
    assert_eq!(levy_schwartz_witness(&cp).unwrap(), Some(1.0));
    let log2 = CustomDensity::new("log-squared tail", |a: f64| {
        1.0 / (a.abs() * (2.0 + a.abs()).ln().powi(2))
    });
    assert!(!is_levy_schwartz(&LevyMeasure::Custom(log2)).unwrap());
}

#[test]
fn custom_power_law_moments_follow_tail_exponents() {
    // same shape as a stable measure with alpha = 1.3 but supplied as a callable
    let c = CustomDensity::new("power 1.3", |a: f64| a.abs().powf(-2.3));
    let v = LevyMeasure::Custom(c);
    v.validate().unwrap();
    let m = v.moment(1.0).unwrap();
    assert!(m.mu_k0.is_infinite());
    assert!((m.mu_k_inf - 2.0 / 0.3).abs() < 1e-6 * (2.0 / 0.3), "{}", m.mu_k_inf);
    let m2 = v.moment(2.0).unwrap();
    assert!((m2.mu_k0 - 2.0 / 0.7).abs() < 1e-8);
    assert!(m2.mu_k_inf.is_infinite());
}

#[test]
fn custom_compact_density() {
    let c = CustomDensity::new("box", |a: f64| if a.abs() < 0.5 { 1.0 } else { 0.0 });
    let m = LevyMeasure::Custom(c).moment(0.0).unwrap();
    assert!((m.mu_k0 - 1.0).abs() < 1e-12);
    assert_eq!(m.mu_k_inf, 0.0);
}

#[test]
fn non_levy_custom_density_rejected() {
    let c = CustomDensity::new("too singular", |a: f64| a.abs().powf(-3.5));
    assert!(matches!(LevyMeasure::Custom(c).validate(), Err(LevyError::NotLevy(_))));
}

#[test]
fn stable_constant_by_quadrature() {
    // int_0^inf (1 - cos u) u^{-1-alpha} du by panels, oracle for the closed form
    for alpha in [0.3f64, 0.7, 1.0, 1.5, 1.9] {
        let f = |u: f64| (1.0 - u.cos()) * u.powf(-1.0 - alpha);
        let mut q = 0.0;
        // near 0 the integrand is u^{1-alpha}/2, integrate the series exactly on (0, 1e-3)
        let e0 = 1e-3f64;
        q += 0.5 * e0.powf(2.0 - alpha) / (2.0 - alpha);
        q += midpoint(e0, 1.0, 200_000, f);
        q += midpoint(1.0, 2000.0, 4_000_000, f);
        // tail: int_T^inf u^{-1-alpha} (1 - cos u) ~ T^{-alpha}/alpha
        q += 2000f64.powf(-alpha) / alpha;
        let closed = one_minus_cos_integral(alpha);
        assert!((q - closed).abs() < 2e-4 * closed, "alpha={alpha}: {q} vs {closed}");
    }
}

#[test]
fn gaussian_exponent() {
    let t = LevyTriplet::gaussian(0.0, 1.0).unwrap();
    let f = levy_exponent(&t, 2.0).unwrap();
    assert_eq!(f.re, -2.0);
    assert_eq!(f.im, 0.0);
}

#[test]
fn stable_unit_exponent_quadrature_agrees() {
    let v = stable(1.0);
    let q = v.jump_exponent_quadrature(-3.0).unwrap();
    assert!((q.re + 3.0).abs() < 1e-6, "{q}");
    assert!(q.im.abs() < 1e-6);
    assert_eq!(v.jump_exponent(-3.0).unwrap().re, -3.0);
}

#[test]
fn exponent_vanishes_at_zero() {
    let triplets = [
        LevyTriplet::gaussian(0.7, 2.0).unwrap(),
        LevyTriplet::stable(1.2, 0.8).unwrap(),
        LevyTriplet::variance_gamma(1.5).unwrap(),
        LevyTriplet::compound_poisson(3.0, ProbabilityLaw::Gaussian { mean: 0.2, var: 0.5 }).unwrap(),
    ];
    for t in &triplets {
        let f = levy_exponent(t, 0.0).unwrap();
        assert_eq!(f.re, 0.0);
        assert_eq!(f.im, 0.0);
    }
}

#[test]
fn closed_forms_match_quadrature_on_grid() {
    let measures = [
        stable(0.5),
        stable(1.0),
        stable(1.5),
        LevyMeasure::Stable { alpha: 1.8, scale: 0.7 },
        LevyMeasure::VarianceGamma { lambda: 1.0 },
        LevyMeasure::VarianceGamma { lambda: 3.0 },
    ];
    for v in &measures {
        for i in -20..=20 {
            let w = 0.5 * i as f64;
            let c = v.jump_exponent(w).unwrap();
            let q = v.jump_exponent_quadrature(w).unwrap();
            assert!((c - q).norm() <= 1e-6 * (1.0 + c.norm()), "{v:?} w={w}: {c} vs {q}");
        }
    }
}

#[test]
fn poisson_exponent_against_direct_expectation() {
    // E over a two-point law computed by hand
    let law = ProbabilityLaw::TwoPoint {
        lo: -0.5,
        hi: 2.0,
        p_hi: 0.3,
    };
    let t = LevyTriplet::compound_poisson(1.7, law).unwrap();
    let w = 1.3;
    let cf = 0.3 * num_complex::Complex64::from_polar(1.0, 2.0 * w)
        + 0.7 * num_complex::Complex64::from_polar(1.0, -0.5 * w);
    // compensator only sees the inner atom at -0.5
    let expect = 1.7 * (cf - 1.0) - num_complex::Complex64::new(0.0, w * 1.7 * 0.7 * -0.5);
    assert!((levy_exponent(&t, w).unwrap() - expect).norm() < 1e-14);
}

#[test]
fn uniform_law_cf_matches_sinc() {
    let law = ProbabilityLaw::Uniform { lo: 1.0, hi: 3.0 };
    let w = 0.8;
    let direct = midpoint(1.0, 3.0, 100_000, |a| (a * w).cos()) / 2.0;
    assert!((law.cf(w).re - direct).abs() < 1e-9);
    assert!(law.cf(PI / 2.0).norm() <= 1.0);
}

#[test]
fn invalid_triplets_rejected() {
    assert!(LevyTriplet::gaussian(0.0, -1.0).is_err());
    assert!(LevyTriplet::stable(2.0, 1.0).is_err());
    assert!(LevyTriplet::compound_poisson(1.0, ProbabilityLaw::Dirac { a0: 0.0 }).is_err());
}

fn any_triplet() -> impl Strategy<Value = LevyTriplet> {
    prop_oneof![
        (-2.0..2.0f64, 0.0..3.0f64).prop_map(|(m, s)| LevyTriplet::gaussian(m, s).unwrap()),
        (0.1..1.95f64, 0.2..3.0f64).prop_map(|(a, g)| LevyTriplet::stable(a, g).unwrap()),
        (0.2..5.0f64).prop_map(|l| LevyTriplet::variance_gamma(l).unwrap()),
        (0.1..5.0f64, -3.0..3.0f64, 0.05..2.0f64).prop_map(|(r, m, s)| {
            LevyTriplet::compound_poisson(r, ProbabilityLaw::Gaussian { mean: m, var: s }).unwrap()
        }),
    ]
}

proptest! {
    #[test]
    fn exponent_is_hermitian(t in any_triplet(), w in -20.0..20.0f64) {
        let a = levy_exponent(&t, w).unwrap();
        let b = levy_exponent(&t, -w).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn symmetric_driftless_exponent_is_real_nonpositive(
        alpha in 0.1..1.95f64, lam in 0.2..5.0f64, w in -20.0..20.0f64
    ) {
        for t in [LevyTriplet::stable(alpha, 1.0).unwrap(), LevyTriplet::variance_gamma(lam).unwrap()] {
            let f = levy_exponent(&t, w).unwrap();
            prop_assert!(f.im == 0.0 && f.re <= 0.0);
        }
    }

    #[test]
    fn class_lattice_identity(
        alpha in 0.1..1.95f64,
        p1 in 0.0..3.0f64, q1 in 0.0..3.0f64, p2 in 0.0..3.0f64, q2 in 0.0..3.0f64
    ) {
        let v = stable(alpha);
        let both = in_class(&v, p1, q1).unwrap() && in_class(&v, p2, q2).unwrap();
        prop_assert_eq!(both, in_class(&v, p1.max(p2), q1.min(q2)).unwrap());
    }
}
