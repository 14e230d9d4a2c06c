use canard_core::hybrid::integrate;
use canard_core::model::{build_global_return, build_minimal_3d, reflect};
use canard_core::zoneflow::{central_closed_form, first_integral_h, ZoneFlow};
use canard_core::{Params, ReturnParams, State};
use proptest::prelude::*;

fn rel(a: &State, b: &State) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn params() -> impl Strategy<Value = Params> {
    (0.2..2.0f64, prop_oneof![-2.0..-0.2f64, 0.2..2.0f64], 0.05..0.5f64, prop_oneof![Just(1e-2), Just(1e-3)])
        .prop_map(|(p1, p2, p3, eps)| Params::new(p1, p2, p3, eps))
}

fn state() -> impl Strategy<Value = State> {
    (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64).prop_map(|(x, y, z)| State::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zone_flows_compose(p in params(), s in state(), t1 in 0.0..40.0f64, t2 in 0.0..40.0f64, a1 in -1.0..1.0f64) {
        let ret = ReturnParams { alpha1: a1, alpha2: 0.1, alpha3: -0.3, kappa: 0.1, zeta: 0.0, xi: -0.2, x0: 1.0 };
        for spec in [build_minimal_3d(p).unwrap(), build_global_return(p, ret).unwrap()] {
            for i in 0..spec.zones().len() {
                let f = ZoneFlow::from_spec(&spec, i);
                // outer zones contract at rate ~1: backward flows amplify roundoff by e^|t|,
                // so only the (rotational) central zone is also checked backwards
                let (t1, t2) = if i == spec.central_zone() { (t1 - 20.0, -5.0 * t2) } else { (t1, t2) };
                let two_steps = f.flow(&f.flow(&s, t1), t2);
                let one_step = f.flow(&s, t1 + t2);
                prop_assert!(rel(&two_steps, &one_step) <= 1e-12, "zone {i}: {two_steps:?} vs {one_step:?}");
            }
        }
    }

    #[test]
    fn central_flow_commutes_with_reflection(p in params(), s in state(), t in -200.0..200.0f64) {
        let forward = reflect(&central_closed_form(&p, &s, t));
        let backward = central_closed_form(&p, &reflect(&s), -t);
        prop_assert!(rel(&forward, &backward) <= 1e-12);
        let spec = build_minimal_3d(p).unwrap();
        let f = ZoneFlow::from_spec(&spec, spec.central_zone());
        prop_assert!(rel(&reflect(&f.flow(&s, t)), &f.flow(&reflect(&s), -t)) <= 1e-12);
    }

    #[test]
    fn h_is_constant_on_central_transits(z0 in -0.3..-0.05f64, y0 in 0.0..0.02f64) {
        let p = Params::new(1.0, -1.0, 0.2, 0.01);
        let spec = build_minimal_3d(p).unwrap();
        let tr = integrate(&spec, &State::new(-p.delta, y0, z0), 2000.0).unwrap();
        let central = spec.central_zone();
        let mut checked = 0;
        for seg in tr.segments.iter().filter(|g| g.zone == central) {
            let h0 = first_integral_h(&p, &seg.s_in);
            for smp in tr.samples.iter().filter(|m| m.t >= seg.t_in && m.t <= seg.t_out) {
                let h = first_integral_h(&p, &smp.state);
                prop_assert!((h - h0).abs() <= 1e-12 * h0.max(f64::MIN_POSITIVE), "{h} vs {h0}");
                checked += 1;
            }
            prop_assert!((first_integral_h(&p, &seg.s_out) - h0).abs() <= 1e-12 * h0);
        }
        prop_assert!(checked > 0);
    }
}
