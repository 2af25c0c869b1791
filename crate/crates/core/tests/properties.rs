use nalgebra::Vector2;
use proptest::prelude::*;

use tritrophic_hopf::averaging::{AveragedField, ClosedFormField};
use tritrophic_hopf::equilibria::all_equilibria;
use tritrophic_hopf::hopf::{solve_constraints, spectrum_p3};
use tritrophic_hopf::model::vector_field;
use tritrophic_hopf::transform::{CylState, NormalFormFrame, SeriesExpansion};
use tritrophic_hopf::{HopfSetup, ModelParams, StateVec};

fn setup_strategy() -> impl Strategy<Value = HopfSetup> {
    (1.0..5.0f64, 0.05..1.0f64, 0.5..4.0f64, 0.5..3.0f64, 0.05..0.5f64, -50.0..50.0f64, -3.0..3.0f64)
        .prop_map(|(a1, a2, b1, b2, d1f, l, m)| HopfSetup { a1, a2, b1, b2, d1: d1f * a1, l, m, epsilon: 0.0 })
        .prop_filter("valid setup", |s| s.validate().is_ok() && solve_constraints(s).is_ok())
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64)
        .prop_map(|(a1, a2, b1, b2, d1, d2, k, rho)| ModelParams { a1, a2, b1, b2, d1, d2, k, rho })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plane_is_invariant(p in params_strategy(), x in 0.0..10.0f64, y in 0.0..10.0f64) {
        prop_assert_eq!(vector_field(&p, &StateVec::new(x, y, 0.0)).unwrap().z, 0.0);
    }

    #[test]
    fn existing_equilibria_are_zeros(p in params_strategy()) {
        for e in all_equilibria(&p).into_iter().filter(|e| e.exists) {
            let s = e.state.unwrap();
            prop_assert!(e.residual.unwrap() <= 1e-9 * (1.0 + s.norm_inf()));
        }
    }

    #[test]
    fn unfolding_spectrum(s in setup_strategy(), eps in prop::sample::select(vec![0.0, 0.01, 0.05])) {
        let s = s.with_epsilon(eps);
        if let Ok(p) = solve_constraints(&s) {
            let sp = spectrum_p3(&p).unwrap();
            let scale = sp.lambda_plus.norm();
            prop_assert!((sp.lambda_plus.re - eps * eps * s.l).abs() <= 1e-9 * scale);
            prop_assert!((sp.mu - eps * eps * s.m).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn maps_round_trip(s in setup_strategy(), eps in 1e-3..0.05f64, dx in -0.1..0.1f64, dy in -1.0..1.0f64, z in -1.0..1.0f64) {
        let s = s.with_epsilon(eps);
        if let Ok(frame) = NormalFormFrame::new(&s, eps) {
            let st = StateVec::new(frame.p3[0] * (1.0 + dx), frame.p3[1] + dy, z);
            let back = frame.inverse_map(&frame.forward(&st).unwrap());
            prop_assert!((back.to_vector() - st.to_vector()).amax() <= 1e-12 * st.norm_inf().max(1.0));
        }
    }

    #[test]
    fn closed_form_parity(s in setup_strategy(), r in 0.0..300.0f64, w in -100.0..100.0f64) {
        let f = ClosedFormField::new(&s).unwrap();
        let a = f.eval(Vector2::new(r, w)).unwrap();
        let b = f.eval(Vector2::new(r, -w)).unwrap();
        prop_assert_eq!(a[0], b[0]);
        prop_assert_eq!(a[1], -b[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The series coefficients predict the finite-ε dynamics with an O(ε³)
    /// remainder.
    #[test]
    fn series_agrees_with_finite_epsilon(s in setup_strategy(), theta in 0.0..std::f64::consts::TAU, r in 0.5..3.0f64, w in -2.0..2.0f64) {
        let ex = SeriesExpansion::new(&s).unwrap();
        let c = ex.coefficients(theta, r, w).unwrap();
        let cyl = CylState::new(r, theta, w);
        let residual = |eps: f64| -> Option<f64> {
            let rates = NormalFormFrame::new(&s, eps).ok()?.theta_dynamics(&cyl).ok()?;
            Some((rates.dr_dtheta - eps * c.f11 - eps * eps * c.f21).abs()
                + (rates.dw_dtheta - eps * c.f12 - eps * eps * c.f22).abs())
        };
        let first = (eps_scale(&c) * 1e-2).min(1e-2);
        if let (Some(a), Some(b)) = (residual(first), residual(first / 2.0)) {
            // Cubic remainder: halving ε divides it by about 8.
            let floor = 1e-8 * (c.f11.abs() + c.f12.abs() + 1.0);
            prop_assert!(b <= a / 5.0 || a < floor, "{} {}", a, b);
        }
    }
}

fn eps_scale(c: &tritrophic_hopf::transform::SeriesCoefficients) -> f64 {
    let size = c.f11.abs() + c.f12.abs() + 1.0;
    let second = c.f21.abs() + c.f22.abs() + 1.0;
    (size / second).min(1.0)
}
