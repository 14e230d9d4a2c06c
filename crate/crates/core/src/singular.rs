//! The eps = 0 reduced flow in the (z, x) plane, its singular canards, and the
//! "opened" portraits where the central strip keeps a width `2 delta~`.
//!
//! Outer zones: `x' = sgn(x) (p1 x + p2 z)`, `z' = p3`. In the strip only the
//! constraint line `p1 x + p2 z = 0` carries dynamics.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::smooth::{dopri5, DopriOptions};

/// Only the slow coefficients matter once eps = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl Coefficients {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Self {
        Self { p1, p2, p3 }
    }

    fn check(&self) -> Result<()> {
        if [self.p1, self.p2, self.p3].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Validation(format!("non-finite coefficients {self:?}")))
        }
    }
}

impl From<&Params> for Coefficients {
    fn from(p: &Params) -> Self {
        Self::new(p.p1, p.p2, p.p3)
    }
}

/// A point of the `(z, x)` portrait plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pt {
    pub z: f64,
    pub x: f64,
}

impl Pt {
    pub fn new(z: f64, x: f64) -> Self {
        Self { z, x }
    }

    fn dist(&self, o: &Pt) -> f64 {
        (self.z - o.z).hypot(self.x - o.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducedZone {
    Left,
    Central,
    Right,
}

impl ReducedZone {
    fn sign(self) -> f64 {
        match self {
            Self::Left => -1.0,
            Self::Central => 0.0,
            Self::Right => 1.0,
        }
    }
}

const ZONE_TOL: f64 = 1e-12;

fn in_zone(zone: ReducedZone, x: f64, half_width: f64) -> bool {
    let tol = ZONE_TOL * (1.0 + x.abs());
    match zone {
        ReducedZone::Left => x <= -half_width + tol,
        ReducedZone::Right => x >= half_width - tol,
        ReducedZone::Central => x.abs() <= half_width + tol,
    }
}

/// Outer-zone vector field `(z', x')`.
pub fn reduced_field(c: &Coefficients, zone: ReducedZone, p: Pt) -> Pt {
    Pt::new(c.p3, zone.sign() * (c.p1 * p.x + c.p2 * p.z))
}

/// Exact solution of the reduced flow after time `t` (either sign).
///
/// `half_width` is `delta~` for opened portraits and 0 for the two-zonal one.
/// In the central zone the point must lie on `p1 x + p2 z = 0`.
pub fn reduced_flow(c: &Coefficients, zone: ReducedZone, p: Pt, t: f64, half_width: f64) -> Result<Pt> {
    c.check()?;
    if !in_zone(zone, p.x, half_width) {
        return Err(Error::Validation(format!("{p:?} is not in the {zone:?} zone (half width {half_width})")));
    }
    let Coefficients { p1, p2, p3 } = *c;
    let z = p.z + p3 * t;
    if zone == ReducedZone::Central {
        let u = p1 * p.x + p2 * p.z;
        if p1 == 0.0 || u.abs() > ZONE_TOL * (1.0 + (p1 * p.x).abs() + (p2 * p.z).abs()) {
            return Err(Error::Validation(format!(
                "central reduced dynamics lives on p1 x + p2 z = 0; {p:?} is off it"
            )));
        }
        return Ok(Pt::new(z, -p2 * z / p1));
    }
    let s = zone.sign();
    if p1 == 0.0 {
        return Ok(Pt::new(z, p.x + s * p2 * (p.z * t + 0.5 * p3 * t * t)));
    }
    // u = p1 x + p2 z relaxes (or grows) towards u* = -s p2 p3 / p1
    let u_star = -s * p2 * p3 / p1;
    let u0 = p1 * p.x + p2 * p.z;
    let u = u_star + (u0 - u_star) * (s * p1 * t).exp();
    Ok(Pt::new(z, (u - p2 * z) / p1))
}

/// `u` of the invariant half-line in the given outer zone (`p1 x + p2 z = u`).
pub fn invariant_half_line(c: &Coefficients, zone: ReducedZone) -> Result<f64> {
    if c.p1 == 0.0 || zone == ReducedZone::Central {
        return Err(Error::Degenerate("invariant half-lines need p1 != 0 and an outer zone".into()));
    }
    Ok(-zone.sign() * c.p2 * c.p3 / c.p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tangency {
    VisibleVisible,
    /// The Teixeira singularity.
    InvisibleInvisible,
    Degenerate,
}

/// Kind of the double tangency at the origin of the two-zonal flow.
///
/// At a tangency `x' = 0` and `x'' = sgn(x) p2 p3`, so each side is visible
/// exactly when `p2 p3 > 0`.
pub fn tangency_classification(c: &Coefficients) -> Tangency {
    let q = c.p2 * c.p3;
    if q > 0.0 {
        Tangency::VisibleVisible
    } else if q < 0.0 {
        Tangency::InvisibleInvisible
    } else {
        Tangency::Degenerate
    }
}

/// Weak line `p1 x + p2 z = 0` and strong direction `(dz, dx)` through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularCanards {
    /// `(a, b)` with the weak canard on `a x + b z = 0`; `None` when it is no canard.
    pub weak: Option<(f64, f64)>,
    pub strong: (f64, f64),
    pub notes: Vec<String>,
}

pub fn singular_canard_directions(c: &Coefficients) -> Result<SingularCanards> {
    c.check()?;
    if c.p1 == 0.0 {
        return Err(Error::NoRotation { p1: c.p1 });
    }
    let mut notes = vec![];
    let mut weak = Some((c.p1, c.p2));
    if c.p2 == 0.0 {
        weak = None;
        notes.push("FSN-I: the weak line collapses onto x = 0 and does not exist as a canard".into());
    }
    if c.p3 == 0.0 {
        weak = None;
        notes.push("FSN-II: the weak line persists only as a line of equilibria".into());
    }
    if c.p1 < 0.0 {
        notes.push("p1 < 0: strong direction uses sqrt(|p1|); true and faux canards are exchanged".into());
    }
    Ok(SingularCanards { weak, strong: (0.5 * c.p3 / c.p1.abs().sqrt(), 1.0), notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub z: (f64, f64),
    pub x: (f64, f64),
}

impl Default for Window {
    fn default() -> Self {
        Self { z: (-1.0, 1.0), x: (-1.0, 1.0) }
    }
}

impl Window {
    fn contains(&self, p: Pt) -> bool {
        p.z >= self.z.0 && p.z <= self.z.1 && p.x >= self.x.0 && p.x <= self.x.1
    }

    fn span(&self) -> f64 {
        (self.z.1 - self.z.0).hypot(self.x.1 - self.x.0)
    }

    /// `0.1` of the x-extent.
    pub fn default_half_width(&self) -> f64 {
        0.1 * (self.x.1 - self.x.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub z: f64,
    pub x: f64,
    pub dz: f64,
    pub dx: f64,
    pub zone: ReducedZone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLine {
    pub zone: ReducedZone,
    /// `p1 x + p2 z = u` on this half-line.
    pub u: f64,
    pub points: Vec<Pt>,
}

/// A singular canard as three pieces: left zone, strip, right zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanardPolyline {
    pub left: Vec<Pt>,
    pub central: Vec<Pt>,
    pub right: Vec<Pt>,
    /// Whether the pieces chain into one orbit (only meaningful when opened).
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPortrait {
    pub coefficients: Coefficients,
    pub window: Window,
    pub opened: bool,
    pub half_width: f64,
    pub tangency: Tangency,
    pub tangency_points: Vec<Pt>,
    pub half_lines: Vec<HalfLine>,
    pub weak: Option<CanardPolyline>,
    pub strong: Option<CanardPolyline>,
    /// FSN-II: endpoints of the line of equilibria `x = -(p2/p1) z` inside the window.
    pub equilibria: Option<[Pt; 2]>,
    /// Folded node: boundary of the funnel (left strong piece, then the fold line).
    pub funnel: Option<Vec<Pt>>,
    pub field: Vec<FieldSample>,
}

impl SingularPortrait {
    /// Funnel membership by the closed-form strong orbit: left of the strip,
    /// before the strong endpoint, and above the strong canard.
    pub fn in_funnel(&self, p: Pt) -> bool {
        let Some(strong) = &self.strong else { return false };
        if self.funnel.is_none() || p.x >= -self.half_width {
            return false;
        }
        let end = strong.central[0];
        if p.z >= end.z {
            return false;
        }
        let c = &self.coefficients;
        match reduced_flow(c, ReducedZone::Left, end, (p.z - end.z) / c.p3, self.half_width) {
            Ok(q) => p.x > q.x,
            Err(_) => false,
        }
    }
}

const TRACE_STEPS: usize = 400;

/// Sample an outer orbit from `start` until it leaves the window or its zone.
/// The first point is `start`.
fn trace(c: &Coefficients, zone: ReducedZone, start: Pt, forward: bool, window: &Window, hw: f64) -> Vec<Pt> {
    let mut pts = vec![start];
    let dir = if forward { 1.0 } else { -1.0 };
    let target = window.span() / TRACE_STEPS as f64;
    let mut p = start;
    for _ in 0..20 * TRACE_STEPS {
        let v = reduced_field(c, zone, p);
        let speed = v.z.hypot(v.x);
        if speed < 1e-14 {
            break;
        }
        let dt = dir * target / speed;
        let Ok(q) = reduced_flow(c, zone, p, dt, hw) else { break };
        if !in_zone(zone, q.x, hw) {
            // stop on the boundary of the zone
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                match reduced_flow(c, zone, p, mid, hw) {
                    Ok(m) if in_zone(zone, m.x, hw) => lo = mid,
                    _ => hi = mid,
                }
            }
            if let Ok(m) = reduced_flow(c, zone, p, lo, hw) {
                if lo != 0.0 {
                    pts.push(m);
                }
            }
            break;
        }
        if !window.contains(q) {
            pts.push(q);
            break;
        }
        pts.push(q);
        p = q;
    }
    pts
}

fn reversed(mut v: Vec<Pt>) -> Vec<Pt> {
    v.reverse();
    v
}

/// `p1 x + p2 z = u` clipped to the window and to the zone.
fn clip_line(c: &Coefficients, zone: ReducedZone, u: f64, window: &Window, hw: f64) -> Vec<Pt> {
    let n = TRACE_STEPS;
    (0..=n)
        .map(|i| window.z.0 + (window.z.1 - window.z.0) * i as f64 / n as f64)
        .map(|z| Pt::new(z, (u - c.p2 * z) / c.p1))
        .filter(|p| window.contains(*p) && in_zone(zone, p.x, hw) && p.x.abs() >= hw)
        .collect()
}

/// Ends of the central pieces must coincide with the outer attachments.
fn chained(central: &[Pt], left: &[Pt], right: &[Pt], scale: f64) -> bool {
    let tol = 1e-9 * scale.max(1.0);
    match (central.first(), central.last(), left.last(), right.first()) {
        (Some(a), Some(b), Some(l), Some(r)) => a.dist(l) <= tol && b.dist(r) <= tol,
        _ => false,
    }
}

/// Singular phase portrait; `half_width` is `delta~` (ignored when not opened).
pub fn singular_portrait(
    c: &Coefficients,
    window: Window,
    opened: bool,
    half_width: Option<f64>,
    grid: usize,
) -> Result<SingularPortrait> {
    c.check()?;
    if !(window.z.1 > window.z.0 && window.x.1 > window.x.0) {
        return Err(Error::Validation(format!("empty window {window:?}")));
    }
    let hw = if opened { half_width.unwrap_or_else(|| window.default_half_width()) } else { 0.0 };
    if opened && !(hw > 0.0) {
        return Err(Error::Validation(format!("opened portraits need delta~ > 0, got {hw}")));
    }
    let Coefficients { p1, p2, p3 } = *c;
    let tangency = tangency_classification(c);
    let scale = window.span();

    let mut field = vec![];
    let g = grid.max(2);
    for i in 0..g {
        for j in 0..g {
            let z = window.z.0 + (window.z.1 - window.z.0) * i as f64 / (g - 1) as f64;
            let x = window.x.0 + (window.x.1 - window.x.0) * j as f64 / (g - 1) as f64;
            let zone = if x < -hw {
                ReducedZone::Left
            } else if x > hw {
                ReducedZone::Right
            } else {
                // no vector field is drawn inside the strip (or on the corner line)
                continue;
            };
            let v = reduced_field(c, zone, Pt::new(z, x));
            field.push(FieldSample { z, x, dz: v.z, dx: v.x, zone });
        }
    }

    let half_lines = if p1 != 0.0 {
        [ReducedZone::Left, ReducedZone::Right]
            .into_iter()
            .map(|zone| {
                let u = invariant_half_line(c, zone)?;
                Ok(HalfLine { zone, u, points: clip_line(c, zone, u, &window, hw) })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![]
    };

    // tangency points on the x-nullcline at the strip boundaries
    let tangency_points = if p2 != 0.0 {
        vec![Pt::new(p1 * hw / p2, -hw), Pt::new(-p1 * hw / p2, hw)]
    } else {
        vec![]
    };

    let equilibria = (p3 == 0.0 && p1 != 0.0).then(|| {
        let x_of = |z: f64| -p2 * z / p1;
        [Pt::new(window.z.0, x_of(window.z.0)), Pt::new(window.z.1, x_of(window.z.1))]
    });

    let mut weak = None;
    let mut strong = None;
    let mut funnel = None;
    if p1 != 0.0 {
        let sq = p1.abs().sqrt();
        let (sl, sr) = (Pt::new(-hw * p3 / (2.0 * sq), -hw), Pt::new(hw * p3 / (2.0 * sq), hw));
        let central_strong = if opened { vec![sl, sr] } else { vec![Pt::new(0.0, 0.0)] };
        match tangency {
            Tangency::VisibleVisible => {
                // both branches of each tangency orbit stay outside the strip:
                // the incoming/outgoing ones carry the weak canard, the others the strong one
                let (tl, tr) = (tangency_points[0], tangency_points[1]);
                let w_left = reversed(trace(c, ReducedZone::Left, tl, false, &window, hw));
                let w_right = trace(c, ReducedZone::Right, tr, true, &window, hw);
                let s_left = reversed(trace(c, ReducedZone::Left, tl, true, &window, hw));
                let s_right = trace(c, ReducedZone::Right, tr, false, &window, hw);
                let central_weak = if opened { vec![tl, tr] } else { vec![Pt::new(0.0, 0.0)] };
                weak = Some(CanardPolyline {
                    connected: opened && chained(&central_weak, &w_left, &w_right, scale),
                    left: w_left,
                    central: central_weak,
                    right: w_right,
                });
                // these pieces attach at the tangency points, not at the chord ends
                strong = Some(CanardPolyline {
                    connected: opened && chained(&central_strong, &s_left, &s_right, scale),
                    left: s_left,
                    central: central_strong,
                    right: s_right,
                });
            }
            Tangency::InvisibleInvisible | Tangency::Degenerate => {
                // the strong canard runs through the chord endpoints, transversally if
                // the outer flow enters the strip at sl and leaves it at sr
                let left = reversed(trace(c, ReducedZone::Left, sl, false, &window, hw));
                let right = trace(c, ReducedZone::Right, sr, true, &window, hw);
                let transversal = reduced_field(c, ReducedZone::Left, sl).x > 0.0
                    && reduced_field(c, ReducedZone::Right, sr).x > 0.0;
                strong = Some(CanardPolyline {
                    connected: opened && p3 != 0.0 && transversal && chained(&central_strong, &left, &right, scale),
                    left,
                    central: central_strong,
                    right,
                });
                if tangency == Tangency::InvisibleInvisible {
                    // the tangency orbits dive into the strip: the weak canard continues
                    // outside along the invariant half-lines instead
                    let (tl, tr) = (tangency_points[0], tangency_points[1]);
                    let central_weak = if opened { vec![tl, tr] } else { vec![Pt::new(0.0, 0.0)] };
                    let left = half_lines[0].points.clone();
                    let right: Vec<Pt> = half_lines[1].points.clone();
                    let (mut l_ord, mut r_ord) = (left.clone(), right.clone());
                    l_ord.sort_by(|a, b| a.dist(&tl).total_cmp(&b.dist(&tl)).reverse());
                    r_ord.sort_by(|a, b| a.dist(&tr).total_cmp(&b.dist(&tr)));
                    weak = Some(CanardPolyline {
                        connected: opened && chained(&central_weak, &l_ord, &r_ord, scale),
                        left,
                        central: central_weak,
                        right,
                    });
                    if p1 > 0.0 && p3 != 0.0 {
                        let mut f = strong.as_ref().map(|s| s.left.clone()).unwrap_or_default();
                        f.push(Pt::new(window.z.0, -hw));
                        funnel = Some(f);
                    }
                }
            }
        }
    }

    Ok(SingularPortrait {
        coefficients: *c,
        window,
        opened,
        half_width: hw,
        tangency,
        tangency_points: if opened { tangency_points } else { vec![Pt::new(0.0, 0.0)] },
        half_lines,
        weak,
        strong,
        equilibria,
        funnel,
        field,
    })
}

/// Smooth analogue `x' = sgn(x)(p1 x + p2 z)`, `z' = 2 p3 |x|`, integrated adaptively.
pub fn smooth_reduced_flow(c: &Coefficients, p: Pt, t: f64) -> Result<Pt> {
    c.check()?;
    let Coefficients { p1, p2, p3 } = *c;
    let f = |_: f64, y: &Vector2<f64>| {
        let (x, z) = (y[0], y[1]);
        let sgn = if x == 0.0 { 0.0 } else { x.signum() };
        Vector2::new(sgn * (p1 * x + p2 * z), 2.0 * p3 * x.abs())
    };
    let (_, y) = if t >= 0.0 {
        dopri5(f, 0.0, Vector2::new(p.x, p.z), t, &DopriOptions::default(), |_, _| true)?
    } else {
        let g = |s: f64, y: &Vector2<f64>| -f(s, y);
        dopri5(g, 0.0, Vector2::new(p.x, p.z), -t, &DopriOptions::default(), |_, _| true)?
    };
    Ok(Pt::new(y[1], y[0]))
}
