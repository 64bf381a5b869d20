use std::sync::Arc;

use proptest::prelude::*;
use skl_core::bvp::{solve_bvp, BvpOptions, MeasureData};
use skl_core::closed_forms::{Envelope, EnvelopeArgs, EnvelopeKind};
use skl_core::discretization::{build_grid, BoundaryMode, LinearOperator};
use skl_core::geometry::dist;
use skl_core::spectral_oracle::{kelvin_green, oracle_green};
use skl_core::DomainSpec;

fn ball_point() -> impl Strategy<Value = [f64; 3]> {
    (0.05f64..0.9, 0.0f64..std::f64::consts::PI, 0.0f64..(2.0 * std::f64::consts::PI)).prop_map(|(r, t, p)| {
        [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()]
    })
}

fn operator(mu: f64, n: usize) -> LinearOperator {
    let spec = DomainSpec::unit_ball(mu).unwrap();
    let grid = build_grid(&spec, n, 0.7, 0.05).unwrap();
    LinearOperator::assemble(&spec, Arc::new(grid), BoundaryMode::Zero).unwrap()
}

#[test]
fn sharp_constant_is_attained() {
    // a = s/φ, b = sφ with φ the golden ratio.
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let (s, a, b) = (1.0f64, 1.0 / g, g);
    let r = (s + a) * (s + b) / (a * b).max(s * s);
    assert!((r - (2.0 + 5f64.sqrt())).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smoothed_weight_matches_its_cutoff_form(x in ball_point(), t in 1e-4f64..1.0, mu in 0.0f64..=0.25) {
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let w = spec.weights();
        let r = t * spec.beta0();
        let p = x.map(|c| c * r / skl_core::geometry::norm(&x));
        prop_assert!((spec.d_k(&p) - r).abs() < 1e-12);
        let eta = w.eta(r);
        prop_assert!((w.w_tilde(r) - w.w(r) * eta - (1.0 - eta)).abs() <= 1e-12 * w.w_tilde(r).abs().max(1.0));
    }

    #[test]
    fn distance_to_k_is_lipschitz(x in ball_point(), y in ball_point()) {
        let spec = DomainSpec::unit_ball(0.1).unwrap();
        prop_assert!((spec.d_k(&x) - spec.d_k(&y)).abs() <= dist(&x, &y) + 1e-15);
    }

    #[test]
    fn green_envelopes_are_symmetric(x in ball_point(), y in ball_point(), mu in 0.0f64..=0.25) {
        prop_assume!(dist(&x, &y) > 1e-6);
        let spec = DomainSpec::unit_ball(mu).unwrap();
        for kind in [EnvelopeKind::GreenSubcritical, EnvelopeKind::GreenProduct] {
            let e = Envelope::new(kind, &spec);
            let a = e.eval(EnvelopeArgs::Pair { x: &x, y: &y }).unwrap();
            let b = e.eval(EnvelopeArgs::Pair { x: &y, y: &x }).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn free_envelope_is_the_classical_one(x in ball_point(), y in ball_point()) {
        let s = dist(&x, &y);
        prop_assume!(s > 1e-6);
        let spec = DomainSpec::unit_ball(0.0).unwrap();
        let e = Envelope::new(EnvelopeKind::GreenSubcritical, &spec);
        let (dx, dy) = (spec.signed_d(&x), spec.signed_d(&y));
        let classical = s.powf(-1.0) * (dx * dy / (s * s)).min(1.0);
        prop_assert_eq!(e.eval(EnvelopeArgs::Pair { x: &x, y: &y }).unwrap(), classical);
    }

    #[test]
    fn two_green_forms_are_equivalent(x in ball_point(), y in ball_point(), mu in 0.0f64..0.25) {
        prop_assume!(dist(&x, &y) > 1e-6);
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let a = Envelope::new(EnvelopeKind::GreenSubcritical, &spec).eval(EnvelopeArgs::Pair { x: &x, y: &y }).unwrap();
        let b = Envelope::new(EnvelopeKind::GreenProduct, &spec).eval(EnvelopeArgs::Pair { x: &x, y: &y }).unwrap();
        // Sharp constant of (s + a)(s + b) ≍ max(ab, s²) under |a - b| ≤ s.
        let c = (2.0 + 5f64.sqrt()).powf(spec.alpha_minus());
        let r = b / a;
        prop_assert!(r >= 1.0 / c - 1e-12 && r <= c + 1e-12, "ratio {} outside [1/{}, {}]", r, c, c);
    }

    #[test]
    fn kelvin_green_is_symmetric(x in ball_point(), y in ball_point()) {
        prop_assume!(dist(&x, &y) > 1e-3);
        let (a, b) = (kelvin_green(&x, &y), kelvin_green(&y, &x));
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_green_is_symmetric(x in ball_point(), y in ball_point(), mu in 0.0f64..=0.25) {
        prop_assume!(dist(&x, &y) > 0.05 && x.iter().chain(&y).all(|c| c.is_finite()));
        let (r, q) = (skl_core::geometry::norm(&x), skl_core::geometry::norm(&y));
        prop_assume!(r < 0.8 && q < 0.8 && (r - q).abs() > 0.05);
        let spec = DomainSpec::unit_ball(mu).unwrap();
        let a = oracle_green(&spec, &x, &y, 400, 1e-11).unwrap().value;
        let b = oracle_green(&spec, &y, &x, 400, 1e-11).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn assembled_operator_is_symmetric(mu in -0.5f64..=0.25) {
        let op = operator(mu, 17);
        prop_assert_eq!(op.stiffness().asymmetry(), 0.0);
    }

    #[test]
    fn comparison_principle(mu in prop_oneof![Just(-0.3), Just(0.0), Just(0.16)], seed in any::<u64>(), h in -1.0f64..=0.0) {
        use rand::{Rng, SeedableRng};
        let op = operator(mu, 17);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let load: Vec<f64> = (0..op.len()).map(|_| -rng.gen::<f64>() * rng.gen::<f64>()).collect();
        let u = op.with_mode(BoundaryMode::constant(h)).solve_load(&load, 1e-12).unwrap().field;
        let top = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        prop_assert!(u.values.iter().all(|v| *v <= 1e-9 * top));
    }

    #[test]
    fn bvp_is_linear(a in -3.0f64..3.0, w1 in -1.0f64..1.0, w2 in -1.0f64..1.0) {
        let op = operator(0.16, 17);
        let o = BvpOptions::default();
        let d1 = MeasureData::interior_atom([0.0, -0.3, 0.2], w1).with_boundary([0.0, 0.0, 1.0], 1.0);
        let d2 = MeasureData::boundary_atom([0.0; 3], w2).with_interior([0.2, 0.1, -0.1], 1.0);
        let s1 = solve_bvp(&op, &d1, &o).unwrap().u;
        let s2 = solve_bvp(&op, &d2, &o).unwrap().u;
        let s = solve_bvp(&op, &d1.scaled(a).plus(&d2), &o).unwrap().u;
        let top = s.values.iter().chain(&s1.values).chain(&s2.values).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..op.len() {
            prop_assert!((s.values[i] - a * s1.values[i] - s2.values[i]).abs() <= 1e-7 * top);
        }
    }
}
