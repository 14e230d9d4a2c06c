use canard_core::model::{PlanarShape, PlanarSystem, State};
use canard_core::planar::{
    arima, drifting_equilibrium, explosion_scan, find_cycle, follows_repelling_branch, middle_zone_is_focus,
    quasi_canard, transient_mmo, OscKind, CYCLE_TOL,
};

#[test]
fn arima_explosion_is_sharp() {
    let scan = explosion_scan(&arima(0.0, 0.1), (-0.05, 0.05), 11).unwrap();
    let width = scan.width().unwrap_or_else(|| panic!("{:?}", scan.diagnostic));
    assert!(width < 1e-6, "{width:e}");
    let (lo, hi) = scan.transition.unwrap();
    assert!(lo <= hi);
    // just before the jump the cycle is a canard: it follows the repelling branch
    let sys = arima(lo - 1e-12, 0.1);
    let c = find_cycle(&sys).unwrap().cycle.unwrap();
    assert!(follows_repelling_branch(&sys, &c).unwrap(), "{c:?}");
}

#[test]
fn cycles_are_fixed_points_of_the_return_map() {
    for sys in [arima(-0.02, 0.1), arima(-1e-9, 0.1), quasi_canard(0.5, 0.97, 0.1), quasi_canard(0.885, 0.9, 0.2)] {
        let c = find_cycle(&sys).unwrap().cycle.unwrap();
        assert!(c.displacement <= CYCLE_TOL * (1.0 + c.anchor[1].abs()), "{c:?}");
    }
}

#[test]
fn quasi_canards_explode_without_heads() {
    let sys = quasi_canard(0.5, 0.0, 0.1);
    assert!(middle_zone_is_focus(&sys).unwrap());
    let scan = explosion_scan(&sys, (0.9, 1.02), 25).unwrap();
    let (lo, hi) = scan.transition.unwrap_or_else(|| panic!("{:?}", scan.diagnostic));
    // 40% of the relaxation amplitude gained over a short stretch of a
    assert!(0.4 * scan.relaxation_amplitude / (hi - lo) > 50.0, "{scan:?}");
    for p in scan.points.iter().filter(|p| p.amplitude > 0.0) {
        let s = quasi_canard(0.5, p.a, 0.1);
        let c = find_cycle(&s).unwrap().cycle.unwrap();
        assert!(!follows_repelling_branch(&s, &c).unwrap(), "a = {}", p.a);
    }
}

#[test]
fn transition_narrows_with_eps() {
    let width = |eps: f64| {
        let sys = quasi_canard(0.3, 0.0, eps);
        assert!(middle_zone_is_focus(&sys).unwrap());
        explosion_scan(&sys, (0.9, 1.02), 25).unwrap().width().unwrap()
    };
    let (w1, w2) = (width(0.1), width(0.05));
    assert!(w2 < w1, "{w1:e} vs {w2:e}");
}

#[test]
fn drifting_quasi_canard_gives_saos_then_lao() {
    let sys = quasi_canard(0.5, 1.02, 0.1).drifted(-0.001);
    let run = transient_mmo(&sys, drifting_equilibrium(&sys).unwrap(), 600.0, None).unwrap();
    let pattern = run.pattern();
    let saos = pattern.chars().take_while(|&c| c == 'S').count();
    assert!(saos >= 3 && pattern[saos..].starts_with('L'), "{pattern}");
}

#[test]
fn frozen_parameter_keeps_one_oscillation_class() {
    let sys = quasi_canard(0.5, 0.97, 0.1).drifted(0.0);
    let run = transient_mmo(&sys, State::new(0.95, -0.45, 0.97), 600.0, None).unwrap();
    let p = run.pattern();
    assert!(!p.is_empty());
    // after the start-up the class never changes
    let tail: Vec<char> = p.chars().skip(2).collect();
    assert!(tail.windows(2).all(|w| w[0] == w[1]), "{p}");
}

#[test]
fn dynamic_arima_explosion_grows_saos_monotonically() {
    let shape = PlanarShape::Arima { beta: 0.01, delta: 0.1, x0: -1.0 };
    let sys = PlanarSystem::new(shape, 0.12, 0.1).drifted(-0.001);
    let run = transient_mmo(&sys, drifting_equilibrium(&sys).unwrap(), 2500.0, None).unwrap();
    let saos: Vec<f64> = run.oscillations.iter().take_while(|o| o.kind == OscKind::Sao).map(|o| o.amplitude).collect();
    assert!(saos.len() >= 3 && saos.len() < run.oscillations.len(), "{}", run.pattern());
    assert!(saos.windows(2).all(|w| w[1] > w[0]), "{saos:?}");
}
