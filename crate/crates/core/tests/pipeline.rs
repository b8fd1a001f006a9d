//! Cross-module checks: extension, quadrature, kernel expansion and the
//! direct remainder working together.

use std::sync::Arc;

use opcalc::aae::{build_extension, build_extension_with_bounds, BracketPower, FamilySpec, Gaussian, SmoothFunction};
use opcalc::expansion::{
    remainder_direct, remainder_integral_with_estimate, taylor_terms, Instance, Side,
};
use opcalc::hs::{hs_apply_with_estimate, spectral_oracle};
use opcalc::operator::{commutator, op_norm, CommutingTuple};
use opcalc::quadrature::QuadratureSpec;

#[test]
fn quadrature_matches_oracle_across_function_shapes() {
    let a = CommutingTuple::random(3, 1, 6, 2.0).unwrap();
    let quad = QuadratureSpec::default_for(1);
    let fs: Vec<Arc<dyn SmoothFunction>> = vec![
        Arc::new(BracketPower::shifted(vec![0.7], -2.0)),
        Arc::new(BracketPower::new(1, -3.5)),
        Arc::new(Gaussian {
            center: vec![-0.4],
            width: 0.9,
            s: -2.0,
        }),
    ];
    for f in fs {
        let ext = build_extension(f.clone(), 3).unwrap();
        let est = hs_apply_with_estimate(&a, &ext, &quad).unwrap();
        let err = op_norm(&(&est.result.matrix - &spectral_oracle(&a, f.as_ref()).unwrap()));
        assert!(err < 1e-4, "{}: {err:e}", f.name());
        assert!(err <= 3.0 * est.estimate + 1e-12, "{}: {err:e} vs {:e}", f.name(), est.estimate);
    }
}

#[test]
fn remainder_routes_agree_for_a_family() {
    let family = FamilySpec::ShiftedInverseBracket {
        lambdas: vec![-0.5, 0.5],
    }
    .build(1, 4, 7)
    .unwrap();
    let exts: Vec<_> = family
        .members
        .iter()
        .map(|f| build_extension_with_bounds(f.clone(), 4, family.bounds.clone()).unwrap())
        .collect();
    let refs: Vec<_> = exts.iter().collect();
    let (a, b) = Instance::new(5, 5).build(1).unwrap();
    for n in 1..=2 {
        let got = remainder_integral_with_estimate(&a, &b, &refs, n, &QuadratureSpec::default_for(1)).unwrap();
        for (est, f) in got.iter().zip(&family.members) {
            let direct = remainder_direct(&a, &b, f.as_ref(), n, Side::Left).unwrap();
            let err = op_norm(&(&est.result - &direct));
            assert!(err <= 1e-4 * op_norm(&direct).max(1e-3), "n={n}: {err:e}");
            assert!(err <= 3.0 * est.estimate, "n={n}: {err:e} vs {:e}", est.estimate);
        }
    }
}

#[test]
fn taylor_terms_plus_remainder_rebuild_the_commutator() {
    let (a, b) = Instance::new(9, 6).build(2).unwrap();
    let f = BracketPower::shifted(vec![0.2, -0.3], -2.0);
    let fa = spectral_oracle(&a, &f).unwrap();
    let full = commutator(&b, &fa);
    for n in 0..=3 {
        let sum = taylor_terms(&a, &b, &f, n, Side::Left).unwrap() + remainder_direct(&a, &b, &f, n, Side::Left).unwrap();
        assert!(op_norm(&(sum - &full)) <= 1e-12 * op_norm(&full));
    }
}

#[test]
fn higher_order_remainders_shrink_for_nearly_commuting_b() {
    // only the eps-part of B fails to commute with A, and the order-2
    // remainder is cubic in the commutators
    let (a, b) = Instance::new(2, 6).build(1).unwrap();
    let base = a.spectral_apply_real(|x| x[0].sin());
    let f = BracketPower::new(1, -2.0);
    let norms: Vec<f64> = [1e-1, 1e-2]
        .iter()
        .map(|&eps| {
            let bp = &base + &b * num_complex::Complex64::new(eps, 0.0);
            op_norm(&remainder_direct(&a, &bp, &f, 2, Side::Left).unwrap())
        })
        .collect();
    assert!(norms[1] < 0.2 * norms[0], "{norms:?}");
}
