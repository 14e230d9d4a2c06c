use canard_core::hybrid::{integrate_with, winding_number, Control, IntegrateOptions};
use canard_core::mmo::{
    central_spectrum, central_transit, default_horizon, demo_system, find_periodic_mmo, mmo_sample_step, one_period,
    poincare_map, relative_spread, sao_amplitudes, signature, signature_with, MmoOptions, Section, MMO_TOL,
    SAO_MARGIN,
};
use canard_core::model::{build_global_return, build_minimal_3d};
use canard_core::{Params, ReturnParams, State};

fn demo_orbit() -> (canard_core::SystemSpec, canard_core::mmo::PeriodicOrbit) {
    let (p, ret, seed) = demo_system();
    let spec = build_global_return(p, ret).unwrap();
    let search = find_periodic_mmo(&spec, &seed, &MmoOptions::default()).unwrap();
    let orbit = search.orbit.unwrap_or_else(|| panic!("no orbit: {:?}", search.diagnostic));
    (spec, orbit)
}

#[test]
fn demo_orbit_is_a_stable_mmo() {
    let (spec, orbit) = demo_orbit();
    assert!(orbit.residual <= MMO_TOL);
    assert!(orbit.period > 0.0);
    assert_eq!(orbit.signature.pairs.len(), 1, "{}", orbit.signature.notation());
    let (l, s) = orbit.signature.pairs[0];
    assert_eq!(l, 1);
    assert!(s >= 2, "{}", orbit.signature.notation());
    for (re, im) in orbit.multipliers {
        assert!(re.hypot(im) < 1.0);
    }

    // independent check: the return map sends the anchor to itself ...
    let (p, _, _) = demo_system();
    let anchor = State::from(orbit.anchor);
    let back = poincare_map(&spec, Section::central_entry(&p), &anchor, default_horizon(&spec)).unwrap().unwrap();
    assert!((back.state - anchor).amax() <= 1e-8);
    assert!((back.time - orbit.period).abs() <= 1e-6 * orbit.period);
    // ... and so does plain integration over one period
    let tr = one_period(&spec, &anchor, orbit.period).unwrap();
    assert!((tr.final_state() - anchor).amax() <= 10.0 * MMO_TOL);
}

#[test]
fn demo_signature_survives_step_halving() {
    let (spec, orbit) = demo_orbit();
    let (p, _, _) = demo_system();
    let anchor = State::from(orbit.anchor);
    for divisor in [2.0, 4.0] {
        let opts = IntegrateOptions { sample_step: Some(mmo_sample_step(&p) / divisor), ..IntegrateOptions::default() };
        let tr = integrate_with(&spec, &anchor, orbit.period, &opts, |_| Control::Continue).unwrap();
        let sig = signature_with(&tr, SAO_MARGIN, true).unwrap();
        assert_eq!(sig.pairs, orbit.signature.pairs, "step / {divisor}");
    }
}

#[test]
fn nearby_funnel_entries_contract() {
    let (spec, orbit) = demo_orbit();
    let (p, _, _) = demo_system();
    let section = Section::central_entry(&p);
    let h = default_horizon(&spec);
    let a = State::from(orbit.anchor) + State::new(0.0, 0.0, 1e-4);
    let b = State::from(orbit.anchor) - State::new(0.0, 0.0, 1e-4);
    let pa = poincare_map(&spec, section, &a, h).unwrap().unwrap().state;
    let pb = poincare_map(&spec, section, &b, h).unwrap().unwrap().state;
    assert!((pa - pb).amax() < (a - b).amax());
}

#[test]
fn escaping_orbits_have_no_return() {
    // the minimal system has no return mechanism: past the fold the orbit is
    // thrown out along the repelling outer zone
    let p = Params::new(1.0, -1.0, 0.2, 0.01);
    let spec = build_minimal_3d(p).unwrap();
    let s = State::new(-p.delta, 0.0, 0.5);
    assert!(poincare_map(&spec, Section::central_entry(&p), &s, default_horizon(&spec)).unwrap().is_none());
}

#[test]
fn uncoupled_return_has_no_periodic_orbit() {
    let (p, _, seed) = demo_system();
    let zero = ReturnParams { alpha1: 0.0, alpha2: 0.0, alpha3: 0.0, kappa: 0.0, zeta: 0.0, xi: 0.0, x0: 1.0 };
    let spec = build_global_return(p, zero).unwrap();
    let search = find_periodic_mmo(&spec, &seed, &MmoOptions::default()).unwrap();
    assert!(search.orbit.is_none());
    assert!(search.diagnostic.is_some());
}

#[test]
fn strong_return_gives_pure_relaxation() {
    let (p, _, seed) = demo_system();
    let ret = ReturnParams { alpha1: 0.2, alpha2: 0.0, alpha3: -0.5, kappa: 0.0, zeta: 0.0, xi: -0.2, x0: 1.0 };
    let spec = build_global_return(p, ret).unwrap();
    let orbit = find_periodic_mmo(&spec, &seed, &MmoOptions::default()).unwrap().orbit.unwrap();
    assert!(orbit.residual <= MMO_TOL);
    assert_eq!(orbit.signature.pairs, vec![(1, 0)]);
}

#[test]
fn constant_amplitude_saos_under_pure_rotation() {
    let p = Params::new(1.0, -1.0, 0.2, 0.01);
    let ret = ReturnParams { alpha1: 0.0, alpha2: 0.1, alpha3: 0.0, kappa: 0.0, zeta: 1.0, xi: 0.0, x0: 1.0 };
    assert!(central_spectrum(&p, &ret).constant_sao);
    let s = State::new(-0.8 * p.delta + 0.05, 0.0, -0.8 * p.delta);
    let tr = central_transit(&build_global_return(p, ret).unwrap(), &s, 1e4).unwrap();
    let amps = sao_amplitudes(&tr, 0.0).unwrap();
    assert!(amps.len() >= 3, "{amps:?}");
    assert!(relative_spread(&amps) <= 1e-6, "{amps:?}");

    // with alpha3 != 0 the central generator spirals and the amplitudes drift
    let spiral = ReturnParams { alpha3: 0.05, ..ret };
    assert!(!central_spectrum(&p, &spiral).constant_sao);
    let tr = central_transit(&build_global_return(p, spiral).unwrap(), &s, 1e4).unwrap();
    let amps = sao_amplitudes(&tr, 0.0).unwrap();
    assert!(amps.len() >= 2, "{amps:?}");
    assert!(relative_spread(&amps) > 1e-3, "{amps:?}");
}

#[test]
fn folded_saddle_transit_counts_its_turns() {
    // a small rotation about the axis, started near where the axis enters the
    // central zone: the transit lasts most of the axis crossing time
    let p = Params::new(1.0, 1.0, 0.1, 0.01);
    let spec = build_minimal_3d(p).unwrap();
    let z = -0.8 * p.delta;
    let s = State::new(-z + 0.02, p.eps * p.p3, z);
    let tr = central_transit(&spec, &s, 1e4).unwrap();
    let turns = winding_number(&tr, &p).unwrap().turns;
    assert!(turns >= 2);
    let sig = signature(&tr).unwrap();
    assert_eq!(sig.pairs, vec![(0, turns as u32)]);
}
