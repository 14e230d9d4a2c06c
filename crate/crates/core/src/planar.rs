//! Planar Liénard experiments: limit cycles, canard-explosion scans, and the
//! slow-drift transients that turn them into transient MMOs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{integrate_with, Control, IntegrateOptions, Trajectory};
use crate::model::{build_planar, PlanarShape, PlanarSystem, State, SystemSpec};
use crate::zoneflow::ZoneFlow;

/// Return-map displacement accepted at a cycle.
pub const CYCLE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 200;
const BRACKET_POINTS: usize = 96;
/// Oscillations below this fraction of the SAO threshold are treated as roundoff.
pub const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub a: f64,
    /// Crossing of the section `{x = a}` with `x` increasing.
    pub anchor: [f64; 2],
    pub period: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub amplitude: f64,
    /// `|P(y) - y|` at the anchor.
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSearch {
    pub cycle: Option<Cycle>,
    pub diagnostic: Option<String>,
}

struct Section {
    spec: SystemSpec,
    plane: f64,
    /// Index of the zone just right of the section.
    right: usize,
    f_a: f64,
    horizon: f64,
}

impl Section {
    fn new(system: &PlanarSystem) -> Result<Self> {
        if system.drift.is_some() {
            return Err(Error::Validation("cycles are computed for the planar (undrifted) system".into()));
        }
        let spec = build_planar(*system)?.split_at(system.a);
        let plane = system.a;
        let right = spec.zones().iter().position(|z| z.lo == plane).expect("split plane present");
        let f_a = system.shape.curve()?.eval(plane);
        Ok(Self { spec, plane, right, f_a, horizon: 200.0 / system.eps })
    }

    /// Next crossing of the section with `x` increasing, and its time.
    fn ret(&self, y: f64) -> Result<Option<(f64, f64)>> {
        let s0 = State::new(self.plane, y, 0.0);
        let mut hit = None;
        let opts = IntegrateOptions::sparse();
        integrate_with(&self.spec, &s0, self.horizon, &opts, |e| {
            if e.to == self.right && e.from + 1 == self.right {
                hit = Some((e.state[1], e.t));
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        Ok(hit)
    }

    fn displacement(&self, y: f64) -> Result<Option<f64>> {
        Ok(self.ret(y)?.map(|(y1, _)| y1 - y))
    }
}

fn y_scale(system: &PlanarSystem) -> Result<f64> {
    let curve = system.shape.curve()?;
    let vals: Vec<f64> = curve.breakpoints().iter().map(|&b| curve.eval(b)).collect();
    let spread = vals.iter().copied().fold(f64::MIN, f64::max) - vals.iter().copied().fold(f64::MAX, f64::min);
    Ok(2.0 * spread + system.shape.branch_separation())
}

/// `x`-range of a stretch of trajectory, with extrema refined inside each zone.
pub fn x_range(traj: &Trajectory) -> (f64, f64) {
    let Some(spec) = traj.spec() else {
        return (f64::NAN, f64::NAN);
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for seg in &traj.segments {
        let flow = ZoneFlow::from_spec(spec, seg.zone);
        let x = |t: f64| flow.flow(&seg.s_in, t)[0];
        let d = seg.duration();
        let n = 64;
        let vals: Vec<f64> = (0..=n).map(|i| x(d * i as f64 / n as f64)).collect();
        for v in &vals {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        for i in 1..n {
            for sign in [1.0, -1.0] {
                let (a, b, c) = (sign * vals[i - 1], sign * vals[i], sign * vals[i + 1]);
                if b >= a && b >= c {
                    let v = sign * golden_max(|t| sign * x(t), d * (i - 1) as f64 / n as f64, d * (i + 1) as f64 / n as f64);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    (lo, hi)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// The outermost attracting limit cycle around the equilibrium `x = a`.
///
/// The return displacement `d(y) = P(y) - y` on the section `{x = a, x' > 0}` is
/// bracketed on a geometric grid of heights above `f(a)` (so tiny post-Hopf
/// cycles are seen), and the uppermost `+ -> -` sign change is refined by a
/// safeguarded secant (Illinois) iteration.
pub fn find_cycle(system: &PlanarSystem) -> Result<CycleSearch> {
    let sec = Section::new(system)?;
    let top = y_scale(system)?;
    let lo_h = 1e-9 * top;
    let heights: Vec<f64> = (0..BRACKET_POINTS)
        .map(|i| lo_h * (top / lo_h).powf(i as f64 / (BRACKET_POINTS - 1) as f64))
        .collect();
    let noise = 1e-12 * top;
    let ds: Vec<Option<f64>> = heights
        .iter()
        .map(|h| sec.displacement(sec.f_a + h))
        .collect::<Result<_>>()?;
    let mut bracket = None;
    for i in (0..heights.len() - 1).rev() {
        if let (Some(d0), Some(d1)) = (ds[i], ds[i + 1]) {
            if d0 > noise && d1 < -noise {
                bracket = Some((sec.f_a + heights[i], d0, sec.f_a + heights[i + 1], d1));
                break;
            }
        }
    }
    let Some((mut y0, mut d0, mut y1, mut d1)) = bracket else {
        let returned = ds.iter().filter(|d| d.is_some()).count();
        let why = if returned == 0 {
            "no orbit returns to the section: the equilibrium is not surrounded by cycles"
        } else {
            "return displacement never changes sign from expanding to contracting"
        };
        return Ok(CycleSearch { cycle: None, diagnostic: Some(why.into()) });
    };
    let mut side = 0;
    let mut y = y1;
    let mut d = d1;
    for _ in 0..MAX_ITER {
        if d.abs() <= CYCLE_TOL * (1.0 + y.abs()) || (y1 - y0).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            break;
        }
        y = (y0 * d1 - y1 * d0) / (d1 - d0);
        if !(y > y0.min(y1) && y < y0.max(y1)) {
            y = 0.5 * (y0 + y1);
        }
        d = match sec.displacement(y)? {
            Some(v) => v,
            None => return Ok(CycleSearch { cycle: None, diagnostic: Some(format!("orbit from y = {y} did not return")) }),
        };
        if d.signum() == d1.signum() {
            y1 = y;
            d1 = d;
            if side == 1 {
                d0 *= 0.5;
            }
            side = 1;
        } else {
            y0 = y;
            d0 = d;
            if side == -1 {
                d1 *= 0.5;
            }
            side = -1;
        }
    }
    if d.abs() > CYCLE_TOL * (1.0 + y.abs()) && (y1 - y0).abs() > 1e-13 * y.abs().max(1.0) {
        return Ok(CycleSearch {
            cycle: None,
            diagnostic: Some(format!("no convergence after {MAX_ITER} iterations (last y = {y}, d = {d:e})")),
        });
    }
    let (_, period) = sec.ret(y)?.expect("returned during refinement");
    let orbit = integrate_with(
        &sec.spec,
        &State::new(sec.plane, y, 0.0),
        period,
        &IntegrateOptions::sparse(),
        |_| Control::Continue,
    )?;
    let (x_min, x_max) = x_range(&orbit);
    Ok(CycleSearch {
        cycle: Some(Cycle {
            a: system.a,
            anchor: [sec.plane, y],
            period,
            x_min,
            x_max,
            amplitude: x_max - x_min,
            displacement: d.abs(),
        }),
        diagnostic: None,
    })
}

/// Dense orbit of a cycle, for export.
pub fn cycle_orbit(system: &PlanarSystem, cycle: &Cycle) -> Result<Trajectory> {
    let spec = build_planar(*system)?;
    let s0 = State::new(cycle.anchor[0], cycle.anchor[1], 0.0);
    let opts = IntegrateOptions { sample_step: Some(cycle.period / 2048.0), ..IntegrateOptions::default() };
    integrate_with(&spec, &s0, cycle.period, &opts, |_| Control::Continue)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub a: f64,
    /// 0 when there is no cycle (the equilibrium attracts).
    pub amplitude: f64,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionScan {
    pub points: Vec<ScanPoint>,
    /// Largest amplitude seen in the scan.
    pub relaxation_amplitude: f64,
    /// `[a_lo, a_hi]` over which the cycle grows from 10% to 50% of the
    /// relaxation amplitude, bisection-refined; absent when no jump is seen.
    pub transition: Option<(f64, f64)>,
    pub diagnostic: Option<String>,
}

impl ExplosionScan {
    pub fn width(&self) -> Option<f64> {
        self.transition.map(|(a, b)| b - a)
    }
}

fn amplitude_at(system: &PlanarSystem, a: f64) -> Result<ScanPoint> {
    let found = find_cycle(&system.with_a(a))?;
    Ok(match found.cycle {
        Some(c) => ScanPoint { a, amplitude: c.amplitude, period: Some(c.period) },
        None => ScanPoint { a, amplitude: 0.0, period: None },
    })
}

/// Amplitude of the attracting cycle over `n` values of `a` in `range`.
pub fn explosion_scan(system: &PlanarSystem, range: (f64, f64), n: usize) -> Result<ExplosionScan> {
    if n < 2 && range.0 != range.1 {
        return Err(Error::Validation(format!("a scan needs n >= 2 points, got {n}")));
    }
    let n = if range.0 == range.1 { 1 } else { n };
    let grid: Vec<f64> = (0..n)
        .map(|i| if n == 1 { range.0 } else { range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64 })
        .collect();
    let points: Vec<ScanPoint> = grid.par_iter().map(|&a| amplitude_at(system, a)).collect::<Result<_>>()?;
    let relax = points.iter().map(|p| p.amplitude).fold(0.0, f64::max);
    // neighbouring pair `i, i + 1` straddling `level * relax`
    let straddles = |level: f64, i: usize| {
        let cut = level * relax;
        (points[i].amplitude < cut) != (points[i + 1].amplitude < cut)
    };
    let oriented = |i: usize| {
        let (p, q) = (points[i], points[i + 1]);
        if p.amplitude < q.amplitude { (p.a, q.a) } else { (q.a, p.a) }
    };
    let pairs = points.len().saturating_sub(1);
    let Some(i) = (0..pairs).find(|&i| relax > 0.0 && straddles(0.5, i)) else {
        return Ok(ExplosionScan {
            points,
            relaxation_amplitude: relax,
            transition: None,
            diagnostic: Some("amplitude never crosses half the relaxation amplitude".into()),
        });
    };
    // the 10% crossing is searched from there towards the small cycles
    let j = if points[i + 1].amplitude < points[i].amplitude {
        (i..pairs).find(|&j| straddles(0.1, j))
    } else {
        (0..=i).rev().find(|&j| straddles(0.1, j))
    }
    .unwrap_or(i);
    let (half, tenth) = (oriented(i), oriented(j));
    // bisect for the a where the amplitude crosses `level * relax`
    let locate = |level: f64, (a_small, a_large): (f64, f64)| -> Result<f64> {
        let (mut s, mut l) = (a_small, a_large);
        for _ in 0..100 {
            let m = 0.5 * (s + l);
            if m == s || m == l {
                break;
            }
            if amplitude_at(system, m)?.amplitude < level * relax {
                s = m;
            } else {
                l = m;
            }
        }
        Ok(0.5 * (s + l))
    };
    let (x10, x50) = (locate(0.1, tenth)?, locate(0.5, half)?);
    Ok(ExplosionScan {
        points,
        relaxation_amplitude: relax,
        transition: Some((x10.min(x50), x10.max(x50))),
        diagnostic: None,
    })
}

/// Longest `x`-extent of a stretch of `traj` that stays within `eta` (vertically)
/// of a repelling branch (`f' < 0`) of the critical manifold: how far a cycle
/// follows an unstable branch, the signature of canard cycles.
pub fn repelling_tracking(system: &PlanarSystem, traj: &Trajectory, eta: f64) -> Result<f64> {
    let curve = system.shape.curve()?;
    let mut best = 0f64;
    let mut run: Option<(f64, f64)> = None;
    for s in &traj.samples {
        let x = s.state[0];
        let seg = curve.segments()[curve.segment_index(x)];
        let near = seg.slope < 0.0 && (s.state[1] - curve.eval(x)).abs() <= eta;
        run = match (near, run) {
            (true, None) => Some((x, x)),
            (true, Some((lo, hi))) => Some((lo.min(x), hi.max(x))),
            (false, r) => {
                if let Some((lo, hi)) = r {
                    best = best.max(hi - lo);
                }
                None
            }
        };
    }
    if let Some((lo, hi)) = run {
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Fraction of a repelling branch a cycle must follow (within `eps`) to count
/// as a canard cycle.
pub const CANARD_TRACK_FRACTION: f64 = 0.5;

/// Total `x`-length of the bounded repelling pieces of the critical manifold.
pub fn repelling_branch_length(system: &PlanarSystem) -> Result<f64> {
    let curve = system.shape.curve()?;
    let bp = curve.breakpoints();
    Ok(curve
        .segments()
        .iter()
        .enumerate()
        .filter(|(i, s)| s.slope < 0.0 && *i > 0 && *i < bp.len())
        .map(|(i, _)| bp[i] - bp[i - 1])
        .sum())
}

/// Canard morphology test: does the cycle stay within `eps` of a repelling
/// branch for at least [`CANARD_TRACK_FRACTION`] of its length?
pub fn follows_repelling_branch(system: &PlanarSystem, cycle: &Cycle) -> Result<bool> {
    let len = repelling_branch_length(system)?;
    if len <= 0.0 {
        return Ok(false);
    }
    let orbit = cycle_orbit(system, cycle)?;
    Ok(repelling_tracking(system, &orbit, system.eps)? >= CANARD_TRACK_FRACTION * len)
}

/// Whether the zone holding the middle branch has a rotating (focus) equilibrium.
pub fn middle_zone_is_focus(system: &PlanarSystem) -> Result<bool> {
    let spec = build_planar(PlanarSystem { drift: None, ..*system })?;
    let mid = spec.zones().len() / 2;
    Ok(ZoneFlow::from_spec(&spec, mid).omega().is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OscKind {
    #[serde(rename = "SAO")]
    Sao,
    #[serde(rename = "LAO")]
    Lao,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub amplitude: f64,
    pub kind: OscKind,
}

#[derive(Debug, Clone)]
pub struct TransientMmo {
    pub trajectory: Trajectory,
    pub oscillations: Vec<Oscillation>,
    pub threshold: f64,
}

impl TransientMmo {
    /// Labels such as `"SSSL"`.
    pub fn pattern(&self) -> String {
        self.oscillations
            .iter()
            .map(|o| match o.kind {
                OscKind::Sao => 'S',
                OscKind::Lao => 'L',
            })
            .collect()
    }
}

/// Local extrema of `x` along a trajectory's dense samples, refined with the
/// exact zone flows. Returns `(t, x, is_max)` in time order.
///
/// With `detrend`, extrema of `x - z` are taken instead: for a drifted planar
/// system `z = a` is the moving equilibrium, and oscillations much smaller than
/// the drift over a period would otherwise leave `x` monotone.
pub fn x_extrema(traj: &Trajectory, detrend: bool) -> Vec<(f64, f64, bool)> {
    let Some(spec) = traj.spec() else { return vec![] };
    let w = if detrend { 1.0 } else { 0.0 };
    let q = |s: &State| s[0] - w * s[2];
    let s = &traj.samples;
    let mut out = vec![];
    for i in 1..s.len().saturating_sub(1) {
        let (a, b, c) = (q(&s[i - 1].state), q(&s[i].state), q(&s[i + 1].state));
        let is_max = b > a && b >= c;
        let is_min = b < a && b <= c;
        if !(is_max || is_min) {
            continue;
        }
        let sign = if is_max { 1.0 } else { -1.0 };
        let (t0, t2) = (s[i - 1].t, s[i + 1].t);
        let x = |t: f64| {
            traj.segments
                .iter()
                .find(|g| t >= g.t_in && t <= g.t_out)
                .map_or(f64::NAN, |g| q(&ZoneFlow::from_spec(spec, g.zone).flow(&g.s_in, t - g.t_in)))
        };
        let v = sign * golden_max(|t| sign * x(t), t0, t2);
        out.push((s[i].t, if v.is_finite() { v } else { b }, is_max));
    }
    out
}

/// Zig-zag filter: keep alternating extrema that differ from the previous kept
/// one by more than `floor`; roundoff jitter along a quiet stretch is dropped.
pub fn prune_extrema(raw: &[(f64, f64, bool)], floor: f64) -> Vec<(f64, f64, bool)> {
    let mut out: Vec<(f64, f64, bool)> = vec![];
    for &e in raw {
        match out.last_mut() {
            None => out.push(e),
            Some(last) if last.2 == e.2 => {
                let further = if e.2 { e.1 > last.1 } else { e.1 < last.1 };
                if further {
                    *last = e;
                }
            }
            Some(last) => {
                if (e.1 - last.1).abs() > floor {
                    out.push(e);
                }
            }
        }
    }
    out
}

/// Split extrema into oscillations (a minimum followed by a maximum).
pub fn label_oscillations(extrema: &[(f64, f64, bool)], threshold: f64) -> Vec<Oscillation> {
    let mut out = vec![];
    let mut last_min: Option<f64> = None;
    for &(t, x, is_max) in extrema {
        if !is_max {
            last_min = Some(last_min.map_or(x, |m: f64| m.min(x)));
            continue;
        }
        if let Some(m) = last_min.take() {
            let amplitude = x - m;
            let kind = if amplitude < threshold { OscKind::Sao } else { OscKind::Lao };
            out.push(Oscillation { t_max: t, x_min: m, x_max: x, amplitude, kind });
        }
    }
    out
}

/// Drifted planar system integrated from `s0 = (x, y, a)`; oscillations of
/// `x - a` with range below `threshold` (default: half the outer-branch
/// separation) are SAOs.
pub fn transient_mmo(system: &PlanarSystem, s0: State, horizon: f64, threshold: Option<f64>) -> Result<TransientMmo> {
    if system.drift.is_none() {
        return Err(Error::Validation("transient MMOs need a drift c (a' = eps c)".into()));
    }
    let spec = build_planar(*system)?;
    let threshold = threshold.unwrap_or(0.5 * system.shape.branch_separation());
    let period = 2.0 * std::f64::consts::PI / system.eps.sqrt();
    let opts = IntegrateOptions { sample_step: Some(period / 256.0), ..IntegrateOptions::default() };
    let trajectory = integrate_with(&spec, &s0, horizon, &opts, |_| Control::Continue)?;
    let oscillations = label_oscillations(&prune_extrema(&x_extrema(&trajectory, true), NOISE_FLOOR * threshold), threshold);
    Ok(TransientMmo { trajectory, oscillations, threshold })
}

/// Start of the drifting-equilibrium solution of a drifted system at `a = system.a`.
///
/// Inside a linear zone of slope `s`, `x = a - s c`, `y = f(x) + eps c` is an
/// exact solution that follows the moving equilibrium; starting on it avoids
/// a decaying start-up oscillation.
pub fn drifting_equilibrium(system: &PlanarSystem) -> Result<State> {
    let c = system.drift.ok_or_else(|| Error::Validation("no drift set".into()))?;
    let f = system.shape.curve()?;
    let slope = f.segments()[f.segment_index(system.a)].slope;
    let x = system.a - slope * c;
    if f.segment_index(x) != f.segment_index(system.a) {
        return Err(Error::Validation(format!("a = {} is too close to a corner of f for the drift {c}", system.a)));
    }
    Ok(State::new(x, f.eval(x) + system.eps * c, system.a))
}

/// Equilibrium of the planar system, `(a, f(a))`.
pub fn equilibrium(system: &PlanarSystem) -> Result<State> {
    let f = system.shape.curve()?;
    Ok(State::new(system.a, f.eval(system.a), if system.drift.is_some() { system.a } else { 0.0 }))
}

pub fn quasi_canard(k: f64, a: f64, eps: f64) -> PlanarSystem {
    PlanarSystem::new(PlanarShape::QuasiCanard { k }, a, eps)
}

pub fn arima(a: f64, eps: f64) -> PlanarSystem {
    PlanarSystem::new(PlanarShape::arima_default(), a, eps)
}
