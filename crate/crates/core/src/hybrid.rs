//! Event-driven integration across switching planes.
//!
//! A trajectory is a chain of exact zone flows; each switch is located by
//! [`first_exit`] and the next zone is chosen from the direction of the flow on
//! the plane.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_axis, t_star, RotationAxis};
use crate::model::{Family, Params, State, SystemSpec};
use crate::smooth::{dopri5, DopriOptions};
use crate::zoneflow::{first_exit, ZoneFlow};

/// One maximal stretch of a trajectory inside a single zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajSegment {
    pub zone: usize,
    pub t_in: f64,
    pub s_in: State,
    pub t_out: f64,
    pub s_out: State,
}

impl TrajSegment {
    pub fn duration(&self) -> f64 {
        self.t_out - self.t_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Horizon,
    LeftDomain,
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub zone: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub segments: Vec<TrajSegment>,
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub switches: usize,
    spec: Option<SystemSpec>,
}

impl Trajectory {
    pub fn final_state(&self) -> State {
        self.segments.last().map_or_else(State::zeros, |s| s.s_out)
    }

    pub fn final_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_out)
    }

    /// The spec the trajectory was integrated with (absent for smooth references).
    pub fn spec(&self) -> Option<&SystemSpec> {
        self.spec.as_ref()
    }

    /// Exact state at time `t` (within the trajectory's time span).
    pub fn state_at(&self, t: f64) -> Option<State> {
        let spec = self.spec.as_ref()?;
        let seg = self.segments.iter().find(|s| t >= s.t_in && t <= s.t_out)?;
        Some(ZoneFlow::from_spec(spec, seg.zone).flow(&seg.s_in, t - seg.t_in))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub max_switches: usize,
    /// Fixed dense-output step; `None` uses the per-zone defaults.
    pub sample_step: Option<f64>,
    pub dense: bool,
    /// The integration stops with [`Termination::LeftDomain`] once `|s|_inf` exceeds this.
    pub domain_bound: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { max_switches: 10_000_000, sample_step: None, dense: true, domain_bound: 1e8 }
    }
}

impl IntegrateOptions {
    pub fn sparse() -> Self {
        Self { dense: false, ..Self::default() }
    }
}

/// A zone switch, reported to the integration callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub state: State,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Chunk length used when searching for the next switch in zone `i`.
pub fn zone_horizon(spec: &SystemSpec, i: usize) -> f64 {
    let fallback = 1e3 / spec.eps();
    let params = match spec.family() {
        Family::Minimal { params } | Family::GlobalReturn { params, .. } => params,
        Family::Planar { .. } => return fallback,
    };
    let z = spec.zone(i);
    let central = z.lo >= -params.delta && z.hi <= params.delta;
    match t_star(params) {
        Ok(ts) if central && params.p1 > 0.0 => 10.0 * ts,
        _ => fallback,
    }
}

fn sample_step(flow: &ZoneFlow, horizon: f64) -> f64 {
    match flow.omega() {
        Some(w) => 2.0 * PI / w / 64.0,
        None => horizon / 4096.0,
    }
}

pub fn integrate(spec: &SystemSpec, s0: &State, horizon: f64) -> Result<Trajectory> {
    integrate_with(spec, s0, horizon, &IntegrateOptions::default(), |_| Control::Continue)
}

/// Integrate for `horizon` time units, calling `on_switch` after each zone switch.
pub fn integrate_with(
    spec: &SystemSpec,
    s0: &State,
    horizon: f64,
    opts: &IntegrateOptions,
    mut on_switch: impl FnMut(&SwitchEvent) -> Control,
) -> Result<Trajectory> {
    if !s0.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("non-finite initial state {s0:?}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Validation(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    let flows: Vec<ZoneFlow> = (0..spec.zones().len()).map(|i| ZoneFlow::from_spec(spec, i)).collect();
    let chunks: Vec<f64> = (0..flows.len()).map(|i| zone_horizon(spec, i)).collect();
    let mut zone = spec.zone_for_state(s0);
    let mut traj = Trajectory {
        dim: spec.dim(),
        segments: vec![],
        samples: vec![],
        termination: Termination::Horizon,
        switches: 0,
        spec: Some(spec.clone()),
    };
    let (mut t, mut s) = (0.0, *s0);
    let mut seg_start = (0.0, s);
    if horizon == 0.0 {
        traj.segments.push(TrajSegment { zone, t_in: 0.0, s_in: s, t_out: 0.0, s_out: s });
        return Ok(traj);
    }
    loop {
        let flow = &flows[zone];
        let remaining = horizon - t;
        let chunk = remaining.min(chunks[zone]);
        let (dt, next, crossing) = match first_exit(flow, &s, chunk) {
            Some(c) => (c.t, c.state, Some(c)),
            None => (chunk, flow.flow(&s, chunk), None),
        };
        let inside = |v: &State| v.iter().all(|c| c.is_finite()) && v.amax() <= opts.domain_bound;
        let escaped = !inside(&next);
        if escaped {
            // End on the domain boundary rather than on an overflowed state.
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if inside(&flow.flow(&s, mid)) { lo = mid } else { hi = mid }
            }
            let at_hi = flow.flow(&s, hi);
            let (dt_end, s_end) =
                if at_hi.iter().all(|c| c.is_finite()) { (hi, at_hi) } else { (lo, flow.flow(&s, lo)) };
            t += dt_end;
            s = s_end;
        } else {
            t = if crossing.is_none() && chunk == remaining { horizon } else { t + dt };
            s = next;
        }
        let crossing = if escaped { None } else { crossing };
        let Some(c) = crossing else {
            if t >= horizon || escaped {
                close_segment(&mut traj, flow, zone, seg_start, t, s, opts, horizon);
                if escaped {
                    traj.termination = Termination::LeftDomain;
                }
                break;
            }
            continue;
        };
        close_segment(&mut traj, flow, zone, seg_start, t, s, opts, horizon);
        if escaped {
            traj.termination = Termination::LeftDomain;
            break;
        }
        let neighbour = if c.plane == flow.zone.hi { zone + 1 } else { zone - 1 };
        let to = if c.grazing {
            let z = spec.zone_for_state(&s);
            if z == zone || z == neighbour { z } else { neighbour }
        } else {
            neighbour
        };
        traj.switches += 1;
        if traj.switches > opts.max_switches {
            return Err(Error::RunawaySwitching { limit: opts.max_switches });
        }
        let event = SwitchEvent { t, state: s, from: zone, to };
        zone = to;
        seg_start = (t, s);
        if on_switch(&event) == Control::Stop {
            traj.termination = Termination::Event;
            break;
        }
        if t >= horizon {
            break;
        }
    }
    if opts.dense {
        traj.samples.push(Sample { t, state: s, zone: traj.segments.last().map_or(zone, |g| g.zone) });
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn close_segment(
    traj: &mut Trajectory,
    flow: &ZoneFlow,
    zone: usize,
    (t_in, s_in): (f64, State),
    t_out: f64,
    s_out: State,
    opts: &IntegrateOptions,
    horizon: f64,
) {
    traj.segments.push(TrajSegment { zone, t_in, s_in, t_out, s_out });
    if !opts.dense {
        return;
    }
    let dt = opts.sample_step.unwrap_or_else(|| sample_step(flow, horizon));
    let n = ((t_out - t_in) / dt).ceil() as usize;
    let prop = flow.propagator(dt);
    let mut s = s_in;
    for j in 0..n.max(1) {
        let tj = t_in + j as f64 * dt;
        if j > 0 && tj >= t_out {
            break;
        }
        traj.samples.push(Sample { t: tj, state: s, zone });
        s = prop.apply(&s);
    }
}

/// Run `run` from every start in parallel; results come back in input order.
pub fn fan<F>(starts: &[State], run: F) -> Result<Vec<Trajectory>>
where
    F: Fn(&State) -> Result<Trajectory> + Sync + Send,
{
    starts.par_iter().map(run).collect()
}

/// Accumulated rotation around the axis over the central-zone segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingCount {
    pub turns: u64,
    /// Remaining angle in `[0, 2 pi)`.
    pub residual: f64,
    pub axis: RotationAxis,
}

impl WindingCount {
    pub fn total_angle(&self) -> f64 {
        2.0 * PI * self.turns as f64 + self.residual
    }
}

/// Relative tolerance for snapping an angle to an exact multiple of `2 pi`.
pub const WINDING_SNAP: f64 = 1e-9;

/// Angle swept by `(omega u, v)`, `u = p1 x + p2 z`, `v = p1 y - eps p2 p3`.
///
/// For the minimal system this angle grows at exactly `omega = sqrt(eps p1)`,
/// so it is `omega` times the time spent in the central zone (which also covers
/// orbits on the axis itself, where the angle is otherwise undefined). Other
/// families are unwrapped numerically.
pub fn winding_number(traj: &Trajectory, params: &Params) -> Result<WindingCount> {
    if params.p1 <= 0.0 {
        return Err(Error::NoRotation { p1: params.p1 });
    }
    let axis = rotation_axis(params)?;
    let spec = traj
        .spec()
        .ok_or_else(|| Error::Validation("winding needs a PWL trajectory".into()))?;
    let w = params.omega();
    let tol = params.delta * 1e-12;
    let mut total = 0.0;
    for seg in &traj.segments {
        let zone = spec.zone(seg.zone);
        if zone.lo < -params.delta - tol || zone.hi > params.delta + tol {
            continue;
        }
        total += match spec.family() {
            Family::Minimal { .. } => w * seg.duration(),
            _ => swept_angle(&ZoneFlow::new(zone), seg, params, w),
        };
    }
    Ok(split_angle(total, axis))
}

fn split_angle(total: f64, axis: RotationAxis) -> WindingCount {
    let turns_f = total / (2.0 * PI);
    let nearest = turns_f.round();
    if (turns_f - nearest).abs() <= WINDING_SNAP * nearest.max(1.0) {
        return WindingCount { turns: nearest.max(0.0) as u64, residual: 0.0, axis };
    }
    let turns = turns_f.floor().max(0.0);
    WindingCount { turns: turns as u64, residual: (total - turns * 2.0 * PI).max(0.0), axis }
}

fn rotation_coords(s: &State, p: &Params, w: f64) -> (f64, f64) {
    let u = p.p1 * s[0] + p.p2 * s[2];
    let v = p.p1 * s[1] - p.eps * p.p2 * p.p3;
    (w * u, v)
}

fn swept_angle(flow: &ZoneFlow, seg: &TrajSegment, p: &Params, w: f64) -> f64 {
    let d = seg.duration();
    if d <= 0.0 {
        return 0.0;
    }
    let n = (w * d / (PI / 8.0)).ceil().max(1.0) as usize;
    let h = d / n as f64;
    let prop = flow.propagator(h);
    let mut s = seg.s_in;
    let mut prev = rotation_coords(&s, p, w);
    let mut angle = 0.0;
    for _ in 0..n {
        s = prop.apply(&s);
        let cur = rotation_coords(&s, p, w);
        let cross = prev.0 * cur.1 - prev.1 * cur.0;
        let dot = prev.0 * cur.0 + prev.1 * cur.1;
        angle += cross.atan2(dot);
        prev = cur;
    }
    angle
}

/// The smooth comparison system `x' = -y + x^2` with the same slow equations.
pub fn smooth_field(params: &Params, s: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        -s[1] + s[0] * s[0],
        params.eps * (params.p1 * s[0] + params.p2 * s[2]),
        params.eps * params.p3,
    )
}

/// Adaptive high-order integration of the smooth system, relative tolerance 1e-10.
pub fn integrate_smooth_reference(params: &Params, s0: &State, horizon: f64) -> Result<Trajectory> {
    params.validate()?;
    let bound = IntegrateOptions::default().domain_bound;
    let mut samples = vec![];
    let mut escaped = false;
    let (t, s) = dopri5(
        |_, y| smooth_field(params, y),
        0.0,
        *s0,
        horizon,
        &DopriOptions::default(),
        |t, y| {
            samples.push(Sample { t, state: *y, zone: 0 });
            escaped = y.amax() > bound;
            !escaped
        },
    )?;
    Ok(Trajectory {
        dim: 3,
        segments: vec![TrajSegment { zone: 0, t_in: 0.0, s_in: *s0, t_out: t, s_out: s }],
        samples,
        termination: if escaped { Termination::LeftDomain } else { Termination::Horizon },
        switches: 0,
        spec: None,
    })
}
