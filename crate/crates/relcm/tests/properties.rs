//! Randomised invariants.

use proptest::prelude::*;
use relcm::attractive::AttractiveEvaluator;
use relcm::hypgamma::{HypGammaEvaluator, ScaleParams};
use relcm::scattering::{evolve, DynamicsSpec, MomentumState, State};
use relcm::special_n::SpecialNEvaluator;
use relcm::transforms::{Bump, KernelSpec, TwoComponentFn};
use relcm::Complex64 as C;

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gamma_reflection_conjugation_modular(ap in 0.5..2.0f64, am in 0.5..2.0f64, re in -4.0..4.0f64, t in -0.9..0.9f64) {
        let p = ScaleParams::new(ap, am).unwrap();
        let g = HypGammaEvaluator::new(p);
        let z = C::new(re, t * p.a());
        let gz = g.eval(z).unwrap();
        prop_assert!((gz * g.eval(-z).unwrap() - 1.0).norm() < 1e-10);
        prop_assert!(rel(gz.conj(), g.eval(-z.conj()).unwrap()) < 1e-10);
        prop_assert!(rel(HypGammaEvaluator::new(p.swapped()).eval(z).unwrap(), gz) < 1e-10);
    }

    #[test]
    fn s_matrix_is_unitary(n in 0usize..3, excess in 0.0..3.0f64, k in -6.0..6.0f64) {
        let rk = (n as f64 + 1.0) * std::f64::consts::PI + excess;
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, rk).unwrap(), n).unwrap();
        let [[t, r], _] = ker.s_matrix(k).unwrap();
        prop_assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((t * r.conj() + r * t.conj()).norm() < 1e-12);
    }

    #[test]
    fn eigenfunction_time_reversal(ap in 0.6..1.6f64, am in 0.6..1.6f64, frac in 0.1..0.9f64, x in -1.5..1.5f64, y in 0.1..1.5f64) {
        let p = ScaleParams::new(ap, am).unwrap();
        let b = frac * (am + 0.35 * ap);
        let e = AttractiveEvaluator::new(p, b).unwrap();
        let res = e.time_reversal_residual(C::new(x, 0.0), C::new(y, 0.0)).unwrap();
        prop_assert!(res.norm() < 1e-10, "residual {res}");
    }

    #[test]
    fn coefficient_symmetries(am in 0.7..3.0f64, n in 1usize..4) {
        let Ok(e) = SpecialNEvaluator::new(ScaleParams::new(1.0, am).unwrap(), n) else { return Ok(()) };
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..=n {
            for l in 0..=n {
                let v = e.coeffs.get(k, l);
                prop_assert!((v - e.coeffs.get(l, k)).norm() < 1e-10);
                prop_assert!((v - e.coeffs.get(n - k, n - l)).norm() < 1e-10);
                prop_assert!((v - sgn * e.coeffs.get(k, n - l).conj()).norm() < 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_evolution_is_a_group(t1 in -30.0..30.0f64, t2 in -30.0..30.0f64, k in 0.1..3.0f64) {
        let ker = KernelSpec::special_n(ScaleParams::from_rho_kappa(1.0, 4.0).unwrap(), 0).unwrap();
        let dy = DynamicsSpec::mu_cm(1.0).unwrap();
        let bump = |center, half_width| Bump { center, half_width, amplitude: C::new(1.0, 0.0) };
        let f = TwoComponentFn::new(vec![bump(1.0, 0.6)], vec![bump(1.2, 0.5)]).unwrap();
        let s = State::Momentum(MomentumState { base: f, time: 0.0, profile: dy.profile });
        let once = evolve(&ker, &dy, &s, t1 + t2).unwrap();
        let twice = evolve(&ker, &dy, &evolve(&ker, &dy, &s, t1).unwrap(), t2).unwrap();
        let (State::Momentum(a), State::Momentum(b)) = (once, twice) else { unreachable!() };
        let (va, vb) = (a.eval(k), b.eval(k));
        prop_assert!((va[0] - vb[0]).norm() < 1e-12 && (va[1] - vb[1]).norm() < 1e-12);
        // the multiplier is unimodular
        let f0 = s_eval(&s, k);
        prop_assert!((va[0].norm() - f0[0].norm()).abs() < 1e-12);
    }
}

fn s_eval(s: &State, k: f64) -> [C; 2] {
    match s {
        State::Momentum(m) => m.eval(k),
        State::Position(_) => unreachable!(),
    }
}
