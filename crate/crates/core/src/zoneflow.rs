//! Exact affine flows inside one linearity zone and first crossings of its planes.
//!
//! The generic path exponentiates the augmented homogeneous generator
//! `[[M, c], [0, 0]]`, which handles zero and defective eigenvalues and the
//! secular terms of the fold limits without special cases. The trigonometric
//! and hyperbolic central-zone formulas are kept as independent oracles.

use nalgebra::{Complex, Matrix3, Matrix4, Vector3, Vector4};

use crate::model::{Params, State, SystemSpec, Zone};

/// Threshold on `|x'|` below which a crossing is reported as tangential.
pub const GRAZING_TOL: f64 = 1e-10;

/// A zone generator together with the spectral data used for step control.
#[derive(Debug, Clone)]
pub struct ZoneFlow {
    pub zone: Zone,
    eigenvalues: [Complex<f64>; 3],
    rotation: f64,
    rate: f64,
}

impl ZoneFlow {
    pub fn new(zone: &Zone) -> Self {
        let ev = zone.matrix.complex_eigenvalues();
        let eigenvalues = [ev[0], ev[1], ev[2]];
        let rotation = eigenvalues.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
        let rate = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
        Self { zone: zone.clone(), eigenvalues, rotation, rate }
    }

    pub fn from_spec(spec: &SystemSpec, index: usize) -> Self {
        Self::new(spec.zone(index))
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>; 3] {
        &self.eigenvalues
    }

    /// Largest imaginary part of the spectrum, `None` for non-rotating zones.
    pub fn omega(&self) -> Option<f64> {
        (self.rotation > 0.0).then_some(self.rotation)
    }

    /// Real eigenvalues sorted increasingly (the outer-zone rates), if all are real.
    pub fn real_rates(&self) -> Option<[f64; 3]> {
        if self.rotation > 0.0 {
            return None;
        }
        let mut r = self.eigenvalues.map(|l| l.re);
        r.sort_by(f64::total_cmp);
        Some(r)
    }

    pub fn velocity(&self, s: &State) -> State {
        self.zone.field(s)
    }

    pub fn acceleration(&self, s: &State) -> State {
        self.zone.matrix * self.velocity(s)
    }

    pub fn propagator(&self, t: f64) -> Propagator {
        Propagator::new(&self.zone.matrix, &self.zone.offset, t)
    }

    pub fn flow(&self, s: &State, t: f64) -> State {
        if t == 0.0 {
            return *s;
        }
        self.propagator(t).apply(s)
    }
}

/// `exp(t [[M, c], [0, 0]])`, the exact time-`t` map of `s' = M s + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator(Matrix4<f64>);

impl Propagator {
    pub fn new(m: &Matrix3<f64>, c: &Vector3<f64>, t: f64) -> Self {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&(m * t));
        a.fixed_view_mut::<3, 1>(0, 3).copy_from(&(c * t));
        Self(a.exp())
    }

    pub fn apply(&self, s: &State) -> State {
        let v = self.0 * Vector4::new(s[0], s[1], s[2], 1.0);
        State::new(v[0], v[1], v[2])
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }
}

/// Exact solution of the zone's affine flow from `s` after time `t` (any sign).
pub fn affine_flow(zone: &ZoneFlow, s: &State, t: f64) -> State {
    zone.flow(s, t)
}

/// Closed-form central-zone flow of the minimal system.
///
/// Uses `u = p1 x + p2 z`, `v = p1 y - eps p2 p3`, which satisfy `u' = -v`,
/// `v' = eps p1 u`, so `(u, v)` rotates (p1 > 0), is hyperbolic (p1 < 0) or
/// shears (p1 = 0) while `z` drifts at speed `eps p3`.
pub fn central_closed_form(params: &Params, s: &State, t: f64) -> State {
    let Params { p1, p2, p3, eps, .. } = *params;
    let z = s[2] + eps * p3 * t;
    if p1 == 0.0 {
        // y' = eps p2 z is polynomial in t; x' = -y
        let (y0, z0) = (s[1], s[2]);
        let y = y0 + eps * p2 * (z0 * t + 0.5 * eps * p3 * t * t);
        let x = s[0] - y0 * t - eps * p2 * (0.5 * z0 * t * t + eps * p3 * t * t * t / 6.0);
        return State::new(x, y, z);
    }
    let u0 = p1 * s[0] + p2 * s[2];
    let v0 = p1 * s[1] - eps * p2 * p3;
    let (u, v) = if p1 > 0.0 {
        let w = (eps * p1).sqrt();
        let (sn, cs) = (w * t).sin_cos();
        (u0 * cs - v0 / w * sn, v0 * cs + w * u0 * sn)
    } else {
        let w = (eps * -p1).sqrt();
        let (sh, ch) = ((w * t).sinh(), (w * t).cosh());
        (u0 * ch - v0 / w * sh, v0 * ch - w * u0 * sh)
    };
    State::new((u - p2 * z) / p1, (v + eps * p2 * p3) / p1, z)
}

/// `H = eps p1 (p1 x + p2 z)^2 + (p1 y - eps p2 p3)^2`, conserved in the central zone.
pub fn first_integral_h(params: &Params, s: &State) -> f64 {
    let Params { p1, p2, p3, eps, .. } = *params;
    let u = p1 * s[0] + p2 * s[2];
    let v = p1 * s[1] - eps * p2 * p3;
    eps * p1 * u * u + v * v
}

/// A located crossing of a plane `x = plane`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub state: State,
    pub plane: f64,
    /// `|x'| < GRAZING_TOL` at the crossing.
    pub grazing: bool,
}

/// A plane together with the side the trajectory starts on.
///
/// `g(s) = side * (plane - x)` is positive on the starting side.
#[derive(Debug, Clone, Copy)]
struct Gate {
    plane: f64,
    side: f64,
}

impl Gate {
    fn g(&self, s: &State) -> f64 {
        self.side * (self.plane - s[0])
    }

    fn dg(&self, v: &State) -> f64 {
        -self.side * v[0]
    }
}

/// Smallest `t > 0` with `x(t) = plane_x` along the zone flow, within `horizon`.
///
/// When `s` lies on the plane, the starting side is the one the flow moves
/// into; a trajectory leaving the plane and never coming back has no crossing.
pub fn crossing_time(zone: &ZoneFlow, s: &State, plane_x: f64, horizon: f64) -> Option<Crossing> {
    let side = if s[0] != plane_x {
        (plane_x - s[0]).signum()
    } else {
        let v = zone.velocity(s);
        let d = if v[0] != 0.0 { v[0] } else { zone.acceleration(s)[0] };
        if d == 0.0 {
            return None;
        }
        -d.signum()
    };
    first_hit(zone, s, &[Gate { plane: plane_x, side }], horizon)
}

/// First exit through either bounding plane of the zone within `horizon`.
pub fn first_exit(zone: &ZoneFlow, s: &State, horizon: f64) -> Option<Crossing> {
    let mut gates = Vec::with_capacity(2);
    if zone.zone.lo.is_finite() {
        gates.push(Gate { plane: zone.zone.lo, side: -1.0 });
    }
    if zone.zone.hi.is_finite() {
        gates.push(Gate { plane: zone.zone.hi, side: 1.0 });
    }
    if gates.is_empty() {
        return None;
    }
    first_hit(zone, s, &gates, horizon)
}

/// Step schedule: uniform for rotating zones, geometric otherwise.
struct Steps {
    h: f64,
    growth: f64,
    cap: f64,
}

impl Steps {
    fn new(zone: &ZoneFlow, horizon: f64) -> Self {
        let cap = horizon / 1024.0;
        if zone.rotation > 0.0 {
            let h = (std::f64::consts::PI / (8.0 * zone.rotation)).min(cap);
            Self { h, growth: 1.0, cap: h }
        } else {
            let h0 = if zone.rate > 0.0 { 1.0 / (16.0 * zone.rate) } else { cap / 256.0 };
            Self { h: h0.min(cap), growth: 1.25, cap }
        }
    }

    fn next(&mut self) -> f64 {
        let h = self.h;
        self.h = (self.h * self.growth).min(self.cap);
        h
    }
}

fn first_hit(zone: &ZoneFlow, s: &State, gates: &[Gate], horizon: f64) -> Option<Crossing> {
    if !(horizon > 0.0) || !s.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut steps = Steps::new(zone, horizon);
    let mut cached: Option<(f64, Propagator)> = None;
    let (mut ta, mut sa) = (0.0, *s);
    let mut va = zone.velocity(&sa);
    while ta < horizon {
        let h = steps.next().min(horizon - ta);
        if h <= 0.0 {
            break;
        }
        let prop = match cached {
            Some((hc, p)) if hc == h => p,
            _ => {
                let p = zone.propagator(h);
                cached = Some((h, p));
                p
            }
        };
        let tb = ta + h;
        let sb = prop.apply(&sa);
        if !sb.iter().all(|v| v.is_finite()) {
            return None;
        }
        let vb = zone.velocity(&sb);
        let mut best: Option<Crossing> = None;
        for gate in gates {
            if let Some(c) = refine_interval(zone, s, gate, ta, &sa, &va, tb, &sb, &vb) {
                if best.is_none_or(|b| c.t < b.t) {
                    best = Some(c);
                }
            }
        }
        if best.is_some() {
            return best;
        }
        (ta, sa, va) = (tb, sb, vb);
    }
    None
}

/// Look for the first root of a gate in `[ta, tb]`, including a hidden pair of roots
/// around a turning point of `x`.
#[allow(clippy::too_many_arguments)]
fn refine_interval(
    zone: &ZoneFlow,
    s0: &State,
    gate: &Gate,
    ta: f64,
    sa: &State,
    va: &State,
    tb: f64,
    sb: &State,
    vb: &State,
) -> Option<Crossing> {
    let ga = gate.g(sa);
    let gb = gate.g(sb);
    if ga < 0.0 {
        // started outside: the precondition was violated, exit immediately
        return (ta == 0.0).then(|| finish(zone, s0, gate, 0.0));
    }
    if gb <= 0.0 && !(ga == 0.0 && gb == 0.0) {
        let lo = if ga == 0.0 { bump(ta, tb) } else { ta };
        if ga == 0.0 && gate.g(&zone.flow(s0, lo)) <= 0.0 {
            // leaving the plane outward from the start: not a crossing
            return None;
        }
        return Some(bisect_root(zone, s0, gate, lo, tb));
    }
    // no sign change; check for a minimum of g dipping below zero
    let (da, db) = (gate.dg(va), gate.dg(vb));
    if da < 0.0 && db > 0.0 {
        let tm = bisect_turning(zone, s0, gate, ta, tb);
        let gm = gate.g(&zone.flow(s0, tm));
        if gm < 0.0 {
            return Some(bisect_root(zone, s0, gate, ta, tm));
        }
    }
    None
}

fn bump(ta: f64, tb: f64) -> f64 {
    ta + (tb - ta) * 1e-9
}

fn time_tol(t: f64) -> f64 {
    1e-14 * t.abs().max(1.0)
}

/// Bisection on `[lo, hi]` with `g(lo) > 0 >= g(hi)`, then one Newton polish.
fn bisect_root(zone: &ZoneFlow, s0: &State, gate: &Gate, mut lo: f64, mut hi: f64) -> Crossing {
    for _ in 0..200 {
        if hi - lo <= time_tol(hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gate.g(&zone.flow(s0, mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = hi;
    let st = zone.flow(s0, t);
    let dg = gate.dg(&zone.velocity(&st));
    if dg != 0.0 {
        let tn = t - gate.g(&st) / dg;
        if tn >= lo && tn <= hi && gate.g(&zone.flow(s0, tn)).abs() <= gate.g(&st).abs() {
            t = tn;
        }
    }
    finish(zone, s0, gate, t)
}

/// Zero of `g'` in `[lo, hi]` where `g'` changes sign from negative to positive.
fn bisect_turning(zone: &ZoneFlow, s0: &State, gate: &Gate, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= time_tol(hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gate.dg(&zone.velocity(&zone.flow(s0, mid))) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn finish(zone: &ZoneFlow, s0: &State, gate: &Gate, t: f64) -> Crossing {
    let mut state = zone.flow(s0, t);
    let grazing = zone.velocity(&state)[0].abs() < GRAZING_TOL;
    state[0] = gate.plane;
    Crossing { t, state, plane: gate.plane, grazing }
}
