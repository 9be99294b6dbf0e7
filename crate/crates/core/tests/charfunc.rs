use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use proptest::prelude::*;
use sparsefield::charfunc::{
    bound_constants, characteristic_functional, finite_dim_cf, generalized_exponent, h_metric, h_metric_fields,
    lemma_checks, psd_gram_check, verify_continuity_bound, verify_g_bound, CharError,
};
use sparsefield::grid::{Field, Grid};
use sparsefield::levy::{LevyMeasure, LevyTriplet, ProbabilityLaw};

fn line(n: usize, h: f64) -> Grid {
    Grid::centered(&[n], h).unwrap()
}

fn bump(grid: &Grid, c: [f64; 3], s: f64, amp: f64) -> Field {
    Field::from_fn(grid, |r| {
        let d2: f64 = (0..grid.dims()).map(|k| (r[k] - c[k]).powi(2)).sum();
        amp * (-d2 / (2.0 * s * s)).exp()
    })
}

/// Box of the given height covering [0, 1) on a grid whose cells tile it exactly.
fn unit_box(height: f64) -> Field {
    let grid = line(64, 0.0625);
    Field::from_fn(&grid, |r| if (0.0..1.0).contains(&r[0]) { height } else { 0.0 })
}

#[test]
fn h_metric_formula() {
    assert_eq!(h_metric(2.0, 1.0, 0.0), 1.0);
    assert_eq!(h_metric(1.0, 3.0, -1.0), 4.0);
    for p in [0.3, 1.0, 1.7] {
        assert_eq!(h_metric(p, -2.2, -2.2), 0.0);
    }
}

#[test]
fn big_h_metric_examples() {
    let f = unit_box(1.0);
    let g = unit_box(2.0);
    assert!((h_metric_fields(1.0, &f, &g).unwrap() - 3f64.sqrt()).abs() < 1e-14);
    assert_eq!(h_metric_fields(1.3, &f, &f).unwrap(), 0.0);
    let zero = Field::zeros(f.grid());
    let hp = h_metric_fields(0.8, &f, &zero).unwrap();
    assert!((hp - f.norm_pow(0.8)).abs() < 1e-14);
    let other = Field::zeros(&line(8, 0.1));
    assert!(h_metric_fields(1.0, &f, &other).is_err());
}

#[test]
fn gaussian_constants() {
    let t = LevyTriplet::gaussian(0.0, 1.0).unwrap();
    let bc = bound_constants(&t, 2.0, 2.0).unwrap();
    assert_eq!((bc.p_min, bc.p_max), (2.0, 2.0));
    assert_eq!((bc.kappa1, bc.kappa2), (0.0, 0.0));
    assert_eq!(bc.nu1, 0.0);
    assert!((bc.nu2 - 1.0 / SQRT_2).abs() < 1e-15);
}

#[test]
fn half_variance_constant_is_too_small() {
    // psi = (1 + t) phi gives |F(phi) - F(psi)| / H_2 -> sqrt(2) sigma^2 / 2 as t -> 0
    let t = LevyTriplet::gaussian(0.0, 1.0).unwrap();
    let phi = bump(&line(256, 0.05), [0.0; 3], 0.7, 1.0);
    let psi = phi.scaled(1.001);
    let lhs = (generalized_exponent(&t, &phi).unwrap() - generalized_exponent(&t, &psi).unwrap()).norm();
    let h2 = h_metric_fields(2.0, &phi, &psi).unwrap();
    assert!(lhs > 0.5 * h2 * 1.4);
    let bc = bound_constants(&t, 2.0, 2.0).unwrap();
    assert!(verify_continuity_bound(&t, &bc, &phi, &psi).unwrap().passed);
}

#[test]
fn symmetric_two_point_inner_constant() {
    let law = ProbabilityLaw::TwoPoint {
        lo: -0.5,
        hi: 0.5,
        p_hi: 0.5,
    };
    let t = LevyTriplet::compound_poisson(1.0, law).unwrap();
    let bc = bound_constants(&t, 2.0, 2.0).unwrap();
    assert!(!bc.asymmetric);
    assert!((bc.kappa2 - 0.25 / SQRT_2).abs() < 1e-15);
    assert_eq!(bc.kappa1, 0.0);
}

#[test]
fn asymmetry_adds_order_one() {
    let t = LevyTriplet::compound_poisson(1.0, ProbabilityLaw::Dirac { a0: 0.5 }).unwrap();
    let bc = bound_constants(&t, 2.0, 2.0).unwrap();
    assert!(bc.asymmetric);
    assert_eq!((bc.p_min, bc.p_max), (1.0, 2.0));
}

#[test]
fn drift_and_gaussian_extend_the_order_set() {
    let t = LevyTriplet::new(0.5, 1.0, Some(LevyMeasure::VarianceGamma { lambda: 1.0 })).unwrap();
    let bc = bound_constants(&t, 1.5, 1.5).unwrap();
    assert_eq!((bc.p_min, bc.p_max), (1.0, 2.0));
    assert!(bc.drift && bc.gaussian);
}

#[test]
fn incompatible_orders_rejected() {
    let t = LevyTriplet::stable(1.0, 1.0).unwrap();
    assert!(matches!(
        bound_constants(&t, 0.5, 0.9),
        Err(CharError::Incompatible { .. })
    ));
    assert!(matches!(bound_constants(&t, 1.2, 1.1), Err(CharError::Orders { .. })));
    assert!(bound_constants(&t, 0.9, 1.1).is_ok());
}

#[test]
fn g_bound_gaussian_is_vacuous() {
    let t = LevyTriplet::gaussian(1.0, 2.0).unwrap();
    let bc = bound_constants(&t, 2.0, 2.0).unwrap();
    let r = verify_g_bound(&t, &bc, 200, 3, 20.0).unwrap();
    assert!(r.passed());
    assert_eq!(r.max_ratio, 0.0);
}

#[test]
fn g_bound_stable() {
    let t = LevyTriplet::stable(1.5, 1.0).unwrap();
    let bc = bound_constants(&t, 1.2, 1.8).unwrap();
    let r = verify_g_bound(&t, &bc, 1000, 11, 20.0).unwrap();
    assert!(r.passed(), "{:?}", r.violations.first());
    assert!(r.max_ratio <= 1.0 + 1e-9);
    // equal arguments give zero on both sides
    assert_eq!(h_metric(1.2, 4.0, 4.0), 0.0);
    assert_eq!(
        (t.jump_exponent(4.0).unwrap() - t.jump_exponent(4.0).unwrap()).norm(),
        0.0
    );
}

#[test]
fn g_bound_asymmetric_poisson_and_vg() {
    let cp = LevyTriplet::compound_poisson(2.0, ProbabilityLaw::Gaussian { mean: 0.7, var: 0.4 }).unwrap();
    let vg = LevyTriplet::variance_gamma(1.5).unwrap();
    for (t, p, q) in [(&cp, 2.0, 2.0), (&vg, 0.3, 2.0)] {
        let bc = bound_constants(t, p, q).unwrap();
        let r = verify_g_bound(t, &bc, 1000, 5, 20.0).unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
    }
}

#[test]
fn generalized_exponent_examples() {
    let g = line(512, 0.02);
    let phi = bump(&g, [0.3, 0.0, 0.0], 0.5, 1.2);
    let gauss = LevyTriplet::gaussian(0.0, 1.0).unwrap();
    let f = generalized_exponent(&gauss, &phi).unwrap();
    assert!((f.re + 0.5 * phi.norm_pow(2.0)).abs() < 1e-14);
    assert_eq!(f.im, 0.0);

    let sas = LevyTriplet::stable(1.0, 1.0).unwrap();
    let f = generalized_exponent(&sas, &unit_box(1.0)).unwrap();
    assert!((f.re + 1.0).abs() < 1e-14);

    let zero = Field::zeros(&g);
    for t in [gauss, sas, LevyTriplet::variance_gamma(1.0).unwrap()] {
        assert_eq!(generalized_exponent(&t, &zero).unwrap(), Complex64::new(0.0, 0.0));
    }
}

#[test]
fn closed_forms_agree_with_pointwise_sum() {
    let g = line(256, 0.05);
    let phi = bump(&g, [0.1, 0.0, 0.0], 0.8, 1.7);
    let triplets = [
        LevyTriplet::new(0.3, 0.5, Some(LevyMeasure::Stable { alpha: 1.3, scale: 0.6 })).unwrap(),
        LevyTriplet::variance_gamma(2.0).unwrap(),
    ];
    for t in &triplets {
        let direct: Complex64 =
            phi.values().iter().map(|&x| t.exponent(x).unwrap()).sum::<Complex64>() * g.cell_volume();
        let f = generalized_exponent(t, &phi).unwrap();
        assert!((f - direct).norm() < 1e-12 * (1.0 + direct.norm()));
    }
}

#[test]
fn finite_dim_cf_examples() {
    let g = line(400, 0.025);
    let phi1 = bump(&g, [-2.0, 0.0, 0.0], 0.2, 1.0);
    let phi2 = bump(&g, [2.0, 0.0, 0.0], 0.3, -0.8);
    let t = LevyTriplet::stable(0.9, 1.3).unwrap();
    assert_eq!(
        finite_dim_cf(&t, &[phi1.clone(), phi2.clone()], &[0.0, 0.0]).unwrap(),
        Complex64::new(1.0, 0.0)
    );

    // make the supports exactly disjoint
    let cut = |f: &Field, keep_left: bool| {
        let mut f = f.clone();
        let grid = f.grid().clone();
        for (i, v) in f.values_mut().iter_mut().enumerate() {
            if (grid.position(i)[0] < 0.0) != keep_left {
                *v = 0.0;
            }
        }
        f
    };
    let (a, b) = (cut(&phi1, true), cut(&phi2, false));
    for t in [
        t,
        LevyTriplet::compound_poisson(1.5, ProbabilityLaw::Uniform { lo: 0.2, hi: 1.4 }).unwrap(),
        LevyTriplet::new(0.4, 0.3, Some(LevyMeasure::VarianceGamma { lambda: 0.7 })).unwrap(),
    ] {
        let joint = finite_dim_cf(&t, &[a.clone(), b.clone()], &[1.0, 1.0]).unwrap();
        let prod = characteristic_functional(&t, &a).unwrap() * characteristic_functional(&t, &b).unwrap();
        assert!((joint - prod).norm() < 1e-12);
    }

    let gauss = LevyTriplet::gaussian(0.0, 1.0).unwrap();
    let unit = unit_box(2f64.sqrt());
    let cf = finite_dim_cf(&gauss, &[unit], &[1.0]).unwrap();
    assert!((cf.re - (-1f64).exp()).abs() < 1e-15);
}

#[test]
fn shift_invariance_on_periodic_grid() {
    let g = Grid::centered(&[32, 40], 0.1).unwrap();
    let phi = bump(&g, [0.2, -0.3, 0.0], 0.4, 1.5);
    let t = LevyTriplet::compound_poisson(2.0, ProbabilityLaw::Gaussian { mean: 0.5, var: 1.0 }).unwrap();
    let a = characteristic_functional(&t, &phi).unwrap();
    let b = characteristic_functional(&t, &phi.shifted(&[5, -7])).unwrap();
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn midpoint_order_on_kinked_power() {
    // |r e^{-r^2}|^alpha has a kink at the origin; exact integral Gamma((alpha+1)/2) / alpha^((alpha+1)/2)
    let alpha = 1.2f64;
    let exact = statrs::function::gamma::gamma(0.5 * (alpha + 1.0)) / alpha.powf(0.5 * (alpha + 1.0));
    let t = LevyTriplet::stable(alpha, 1.0).unwrap();
    let err = |h: f64| {
        let n = (16.0 / h).round() as usize;
        let phi = Field::from_fn(&line(n, h), |r| r[0] * (-r[0] * r[0]).exp());
        (generalized_exponent(&t, &phi).unwrap().re + exact).abs()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order} ({e1:e}, {e2:e})");
}

#[test]
fn gram_examples() {
    let g = line(200, 0.05);
    let phi = bump(&g, [0.0; 3], 0.5, 1.0);
    let t = LevyTriplet::variance_gamma(1.0).unwrap();
    let one = psd_gram_check(&t, std::slice::from_ref(&phi), 4, 1).unwrap();
    assert!((one.min_eigenvalue - 1.0).abs() < 1e-15 && one.passed);

    let pair = psd_gram_check(&t, &[phi.clone(), phi.scaled(-1.0)], 16, 1).unwrap();
    let c = characteristic_functional(&t, &phi.scaled(2.0)).unwrap().re;
    assert!((pair.min_eigenvalue - (1.0 - c)).abs() < 1e-12);
    assert!(pair.passed);

    let sas = LevyTriplet::stable(0.7, 1.0).unwrap();
    let phis: Vec<Field> = (0..8)
        .map(|i| {
            bump(
                &g,
                [-3.0 + 0.8 * i as f64, 0.0, 0.0],
                0.3 + 0.05 * i as f64,
                0.5 + 0.2 * i as f64,
            )
        })
        .collect();
    let r = psd_gram_check(&sas, &phis, 32, 9).unwrap();
    assert!(r.passed && r.min_eigenvalue >= -8e-8, "{r:?}");
    let too_many = vec![phi; 17];
    assert!(psd_gram_check(&sas, &too_many, 0, 0).is_err());
}

#[test]
fn continuity_examples() {
    let g = line(256, 0.05);
    let t = LevyTriplet::stable(1.2, 1.0).unwrap();
    let bc = bound_constants(&t, 1.0, 1.4).unwrap();
    let phi = bump(&g, [0.0; 3], 0.6, 2.0);
    let same = verify_continuity_bound(&t, &bc, &phi, &phi).unwrap();
    assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    assert!(same.passed);

    let zero = Field::zeros(&g);
    let r = verify_continuity_bound(&t, &bc, &phi, &zero).unwrap();
    let rhs = bc.nu1 * phi.norm_pow(bc.p_min) + bc.nu2 * phi.norm_pow(bc.p_max);
    assert!((r.rhs - rhs).abs() < 1e-12 * rhs);
    assert!(r.passed);
}

#[test]
fn library_lemma_draws_pass() {
    let r = lemma_checks(10_000, 42);
    assert!(r.passed(), "{r:?}");
}

fn smooth_pair() -> impl Strategy<Value = (Field, Field)> {
    let g = line(128, 0.1);
    (
        -2.0..2.0f64,
        0.2..1.5f64,
        -3.0..3.0f64,
        -2.0..2.0f64,
        0.2..1.5f64,
        -3.0..3.0f64,
    )
        .prop_map(move |(c1, s1, a1, c2, s2, a2)| (bump(&g, [c1, 0.0, 0.0], s1, a1), bump(&g, [c2, 0.0, 0.0], s2, a2)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn continuity_bound_stable(pair in smooth_pair()) {
        let t = LevyTriplet::stable(1.2, 1.0).unwrap();
        let bc = bound_constants(&t, 1.0, 1.4).unwrap();
        let r = verify_continuity_bound(&t, &bc, &pair.0, &pair.1).unwrap();
        prop_assert!(r.passed && r.ratio <= 1.0 + 1e-9, "{:?}", r);
    }

    #[test]
    fn continuity_bound_mixed_triplet(pair in smooth_pair()) {
        let law = ProbabilityLaw::TwoPoint { lo: -0.3, hi: 1.5, p_hi: 0.6 };
        let t = LevyTriplet::new(-0.7, 0.4, Some(LevyMeasure::CompoundPoisson { rate: 1.3, law })).unwrap();
        let bc = bound_constants(&t, 1.5, 1.5).unwrap();
        let r = verify_continuity_bound(&t, &bc, &pair.0, &pair.1).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn cf_modulus_at_most_one(pair in smooth_pair(), alpha in 0.2..1.9f64) {
        let t = LevyTriplet::stable(alpha, 1.0).unwrap();
        prop_assert!(characteristic_functional(&t, &pair.0).unwrap().norm() <= 1.0);
    }

    #[test]
    fn lemma_pointwise(p in 0.01..2.0f64, x in -50.0..50.0f64, y in -50.0..50.0f64) {
        let bound = 1f64.max(2f64.powf((p - 1.0) / 2.0)) * ((x.abs().powf(p) + y.abs().powf(p)) * (x - y).abs().powf(p)).sqrt();
        prop_assert!((x - y).abs().powf(p) <= bound * (1.0 + 1e-12));
        prop_assert!((x * x - y * y).abs().powf(p / 2.0) <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn lemma_summed_and_interpolated(
        f in prop::collection::vec(-5.0..5.0f64, 12),
        g in prop::collection::vec(-5.0..5.0f64, 12),
        p in 0.05..2.0f64, q in 0.05..2.0f64, lam in 0.0..1.0f64,
    ) {
        let grid = line(12, 0.3);
        let ff = Field::new(grid.clone(), f.clone()).unwrap();
        let gg = Field::new(grid, g.clone()).unwrap();
        let sum: f64 = f.iter().zip(&g).map(|(&a, &b)| h_metric(p, a, b)).sum::<f64>() * 0.3;
        let hp = h_metric_fields(p, &ff, &gg).unwrap();
        prop_assert!(sum <= hp * (1.0 + 1e-12));
        let hq = h_metric_fields(q, &ff, &gg).unwrap();
        let mix = h_metric_fields(lam * p + (1.0 - lam) * q, &ff, &gg).unwrap();
        prop_assert!(mix <= (lam.sqrt() * hp + (1.0 - lam).sqrt() * hq) * (1.0 + 1e-12));
    }
}
