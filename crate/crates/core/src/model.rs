//! Parameterised PWL slow-fast families and their zone-wise affine form.
//!
//! Every generator is stored in fast time: for the three-dimensional systems
//!
//! ```text
//! x' = -y + f(x),   y' = eps (p1 x + p2 z),   z' = eps p3 (+ return terms)
//! ```
//!
//! and for the planar Liénard systems `x' = y - f(x)`, `y' = eps (a - x)`.
//! States are always stored as 3-vectors; planar systems keep a frozen third
//! component unless a slow drift on `a` is appended.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub type State = Vector3<f64>;

/// Relative tolerance for continuity of PWL data across breakpoints.
pub const CONTINUITY_RTOL: f64 = 1e-14;

/// Local coefficients of the minimal three-dimensional system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub eps: f64,
    /// Half-width of the central zone.
    pub delta: f64,
}

impl Params {
    /// Parameters with the central half-width tied to `eps`: `delta = pi sqrt(eps)`.
    pub fn new(p1: f64, p2: f64, p3: f64, eps: f64) -> Self {
        Self { p1, p2, p3, eps, delta: default_delta(eps) }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            [self.p1, self.p2, self.p3, self.eps, self.delta].iter().all(|v| v.is_finite()),
            || format!("non-finite parameter in {self:?}"),
        )?;
        ensure(self.eps > 0.0, || format!("eps must be positive, got {}", self.eps))?;
        ensure(self.delta > 0.0, || format!("delta must be positive, got {}", self.delta))?;
        Ok(())
    }

    /// Angular frequency `sqrt(eps p1)` of the central rotation (p1 > 0).
    pub fn omega(&self) -> f64 {
        (self.eps * self.p1).sqrt()
    }
}

/// `delta = pi sqrt(eps)`, the width that makes the winding bound eps-independent.
pub fn default_delta(eps: f64) -> f64 {
    PI * eps.sqrt()
}

/// Coefficients of the linear global return appended to the z-equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub xi: f64,
    /// Abscissa of the fourth-zone fold, `x0 > delta`.
    pub x0: f64,
}

impl ReturnParams {
    /// `alpha1 = alpha3 = 0` and `p2 alpha2 < 0`: small oscillations of constant amplitude.
    pub fn constant_sao_condition(&self, params: &Params) -> bool {
        self.alpha1 == 0.0 && self.alpha3 == 0.0 && params.p2 * self.alpha2 < 0.0
    }

    pub fn is_zero_coupling(&self) -> bool {
        self.alpha1 == 0.0 && self.alpha2 == 0.0 && self.alpha3 == 0.0
    }
}

/// One affine piece `slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub const fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Continuous piecewise-linear function of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlCurve {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
}

impl PwlCurve {
    /// `segments.len()` must be `breakpoints.len() + 1`; segment `i` covers
    /// `[breakpoints[i-1], breakpoints[i]]`.
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Segment>) -> Result<Self> {
        ensure(segments.len() == breakpoints.len() + 1, || {
            format!(
                "{} segments for {} breakpoints (need one more segment than breakpoints)",
                segments.len(),
                breakpoints.len()
            )
        })?;
        ensure(breakpoints.iter().all(|b| b.is_finite()), || "non-finite breakpoint".into())?;
        ensure(breakpoints.windows(2).all(|w| w[0] < w[1]), || {
            format!("breakpoints must be strictly increasing: {breakpoints:?}")
        })?;
        for (i, &b) in breakpoints.iter().enumerate() {
            let left = segments[i].eval(b);
            let right = segments[i + 1].eval(b);
            let scale = left.abs().max(right.abs()).max(1.0);
            ensure((left - right).abs() <= CONTINUITY_RTOL * scale * 4.0, || {
                format!("discontinuity at x = {b}: {left} vs {right}")
            })?;
        }
        Ok(Self { breakpoints, segments })
    }

    /// `f_delta`: flat on `|x| <= delta`, `|x| - delta` outside.
    pub fn minimal(delta: f64) -> Self {
        Self::new(
            vec![-delta, delta],
            vec![Segment::new(-1.0, -delta), Segment::new(0.0, 0.0), Segment::new(1.0, -delta)],
        )
        .expect("minimal curve is continuous by construction")
    }

    /// `f_delta` extended by a fourth, attracting branch beyond `x0`.
    pub fn global_return(delta: f64, x0: f64) -> Result<Self> {
        ensure(x0 > delta, || format!("x0 = {x0} must exceed delta = {delta}"))?;
        Self::new(
            vec![-delta, delta, x0],
            vec![
                Segment::new(-1.0, -delta),
                Segment::new(0.0, 0.0),
                Segment::new(1.0, -delta),
                Segment::new(-1.0, 2.0 * x0 - delta),
            ],
        )
    }

    /// Four-zone function with central slope `beta` and left fold at `x0 < -delta`.
    ///
    /// Written in the `-y + F(x)` convention of the three-dimensional systems:
    /// slope `-1` for `x >= delta` and `x <= x0`, slope `+1` in between.
    pub fn four_zone(beta: f64, delta: f64, x0: f64) -> Result<Self> {
        ensure(delta > 0.0, || format!("delta must be positive, got {delta}"))?;
        ensure(x0 < -delta, || format!("x0 = {x0} must lie left of -delta = {}", -delta))?;
        Self::new(
            vec![x0, -delta, delta],
            vec![
                Segment::new(-1.0, 2.0 * x0 - (beta - 1.0) * delta),
                Segment::new(1.0, -(beta - 1.0) * delta),
                Segment::new(beta, 0.0),
                Segment::new(-1.0, (beta + 1.0) * delta),
            ],
        )
    }

    /// `x + (1 + k)(|x - 1| - |x + 1|) / 2`: corners at `x = +-1`, middle slope `-k`.
    pub fn quasi_canard(k: f64) -> Self {
        Self::new(
            vec![-1.0, 1.0],
            vec![Segment::new(1.0, 1.0 + k), Segment::new(-k, 0.0), Segment::new(1.0, -(1.0 + k))],
        )
        .expect("quasi-canard curve is continuous by construction")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Index of the segment containing `x`; breakpoints belong to the left segment.
    pub fn segment_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.segment_index(x)].eval(x)
    }

    /// Pointwise negation, used to move between the `y - f` and `-y + F` conventions.
    pub fn negated(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            segments: self.segments.iter().map(|s| Segment::new(-s.slope, -s.intercept)).collect(),
        }
    }
}

/// One linearity zone `lo <= x <= hi` with generator `s' = matrix * s + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub lo: f64,
    pub hi: f64,
    pub matrix: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

impl Zone {
    pub fn field(&self, s: &State) -> State {
        self.matrix * s + self.offset
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Which builder produced a spec, with the parameters it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Minimal { params: Params },
    GlobalReturn { params: Params, ret: ReturnParams },
    Planar { system: PlanarSystem },
}

/// A continuous piecewise-affine vector field on zones tiling the x-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    dim: usize,
    zones: Vec<Zone>,
    eps: f64,
    family: Family,
}

impl SystemSpec {
    pub fn new(dim: usize, zones: Vec<Zone>, eps: f64, family: Family) -> Result<Self> {
        ensure(dim == 2 || dim == 3, || format!("dimension must be 2 or 3, got {dim}"))?;
        ensure(!zones.is_empty(), || "at least one zone is required".into())?;
        ensure(zones[0].lo == f64::NEG_INFINITY && zones[zones.len() - 1].hi == f64::INFINITY, || {
            "zones must cover the whole x-axis".into()
        })?;
        for pair in zones.windows(2) {
            ensure(pair[0].hi == pair[1].lo, || {
                format!("gap between zones at {} and {}", pair[0].hi, pair[1].lo)
            })?;
            ensure(pair[0].lo < pair[0].hi, || "empty zone".into())?;
        }
        let spec = Self { dim, zones, eps, family };
        spec.check_continuity()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn zone(&self, i: usize) -> &Zone {
        &self.zones[i]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Switching planes `x = b` in increasing order.
    pub fn planes(&self) -> Vec<f64> {
        self.zones[1..].iter().map(|z| z.lo).collect()
    }

    /// Largest discrepancy of adjacent generators over a basis of each plane.
    pub fn continuity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for pair in self.zones.windows(2) {
            let b = pair[0].hi;
            for s in plane_basis(b) {
                let l = pair[0].field(&s);
                let r = pair[1].field(&s);
                let scale = l.amax().max(r.amax()).max(1.0);
                worst = worst.max((l - r).amax() / scale);
            }
        }
        worst
    }

    fn check_continuity(&self) -> Result<()> {
        let defect = self.continuity_defect();
        ensure(defect <= CONTINUITY_RTOL * 4.0, || {
            format!("vector field is discontinuous across a switching plane (defect {defect:e})")
        })
    }

    /// Zone whose closed interval contains `x`, ties broken towards the left.
    pub fn zone_index(&self, x: f64) -> usize {
        self.zones.partition_point(|z| z.hi < x).min(self.zones.len() - 1)
    }

    /// Zone a trajectory through `s` occupies just after `s`.
    ///
    /// On a switching plane the sign of `x'` decides; when the flow is tangent
    /// the sign of `x''` (identical on both sides, the field being continuous)
    /// decides instead.
    pub fn zone_for_state(&self, s: &State) -> usize {
        let x = s[0];
        let i = self.zone_index(x);
        let on_hi = self.zones[i].hi == x && i + 1 < self.zones.len();
        if !on_hi {
            return i;
        }
        let z = &self.zones[i];
        let v = z.field(s);
        let dx = v[0];
        let dir = if dx != 0.0 { dx } else { (z.matrix * v)[0] };
        if dir > 0.0 {
            i + 1
        } else {
            i
        }
    }

    pub fn field(&self, s: &State) -> State {
        self.zones[self.zone_index(s[0])].field(s)
    }

    /// Same vector field with an extra (inert) switching plane at `x = at`.
    ///
    /// Used to turn section crossings into ordinary zone switches.
    pub fn split_at(&self, at: f64) -> Self {
        if self.planes().contains(&at) {
            return self.clone();
        }
        let i = self.zone_index(at);
        let mut zones = self.zones.clone();
        let mut right = zones[i].clone();
        zones[i].hi = at;
        right.lo = at;
        zones.insert(i + 1, right);
        Self { zones, ..self.clone() }
    }

    /// The same field with time reversed: `s' = -(M s + c)` in every zone.
    pub fn time_reversed(&self) -> Self {
        let zones = self
            .zones
            .iter()
            .map(|z| Zone { matrix: -z.matrix, offset: -z.offset, ..z.clone() })
            .collect();
        Self { zones, ..self.clone() }
    }

    /// Index of the zone containing `x = 0`.
    pub fn central_zone(&self) -> usize {
        self.zone_index(0.0)
    }
}

fn plane_basis(b: f64) -> [State; 3] {
    [State::new(b, 0.0, 0.0), State::new(b, 1.0, 0.0), State::new(b, 0.0, 1.0)]
}

fn zones_from_curve(curve: &PwlCurve, mut row: impl FnMut(&Segment) -> (Matrix3<f64>, Vector3<f64>)) -> Vec<Zone> {
    let bps = curve.breakpoints();
    curve
        .segments()
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { bps[i - 1] };
            let hi = if i == bps.len() { f64::INFINITY } else { bps[i] };
            let (matrix, offset) = row(seg);
            Zone { lo, hi, matrix, offset }
        })
        .collect()
}

fn slow_3d(
    curve: &PwlCurve,
    params: &Params,
    z_row: [f64; 3],
    z_const: f64,
) -> Vec<Zone> {
    let e = params.eps;
    zones_from_curve(curve, |seg| {
        let matrix = Matrix3::new(
            seg.slope, -1.0, 0.0, //
            e * params.p1, 0.0, e * params.p2, //
            e * z_row[0], e * z_row[1], e * z_row[2],
        );
        (matrix, Vector3::new(seg.intercept, 0.0, e * z_const))
    })
}

/// Minimal system `x' = -y + f_delta(x)`, `y' = eps (p1 x + p2 z)`, `z' = eps p3`.
pub fn build_minimal_3d(params: Params) -> Result<SystemSpec> {
    params.validate()?;
    let curve = PwlCurve::minimal(params.delta);
    let zones = slow_3d(&curve, &params, [0.0; 3], params.p3);
    SystemSpec::new(3, zones, params.eps, Family::Minimal { params })
}

/// Minimal system with a fourth zone and linear return terms in the z-equation.
pub fn build_global_return(params: Params, ret: ReturnParams) -> Result<SystemSpec> {
    params.validate()?;
    ensure(
        [ret.alpha1, ret.alpha2, ret.alpha3, ret.kappa, ret.zeta, ret.xi, ret.x0]
            .iter()
            .all(|v| v.is_finite()),
        || format!("non-finite return parameter in {ret:?}"),
    )?;
    ensure(ret.x0 > params.delta, || {
        format!("x0 = {} must exceed delta = {}", ret.x0, params.delta)
    })?;
    let curve = PwlCurve::global_return(params.delta, ret.x0)?;
    let z_const = params.p3 - ret.alpha1 * ret.kappa - ret.alpha2 * ret.zeta - ret.alpha3 * ret.xi;
    let zones = slow_3d(&curve, &params, [ret.alpha1, ret.alpha2, ret.alpha3], z_const);
    SystemSpec::new(3, zones, params.eps, Family::GlobalReturn { params, ret })
}

/// Shape of the critical manifold of a planar Liénard system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum PlanarShape {
    /// Two-piece local system: `f(x) = x + (1 + k)(|x - 1| - |x + 1|) / 2`.
    QuasiCanard { k: f64 },
    /// Three-piece local system with a flat-able central piece and a fourth zone.
    Arima { beta: f64, delta: f64, x0: f64 },
}

/// Default geometry of the four-zone planar system.
///
/// The slopes follow the four-zone formula with unit outer slopes; these
/// values are repository defaults, not taken from any published figure.
pub const ARIMA_DEFAULT_DELTA: f64 = 0.1;
pub const ARIMA_DEFAULT_X0: f64 = -1.0;

impl PlanarShape {
    pub fn arima_default() -> Self {
        PlanarShape::Arima { beta: 0.0, delta: ARIMA_DEFAULT_DELTA, x0: ARIMA_DEFAULT_X0 }
    }

    /// Critical manifold `y = f(x)` in the Liénard convention `eps x' = y - f(x)`.
    pub fn curve(&self) -> Result<PwlCurve> {
        match *self {
            PlanarShape::QuasiCanard { k } => {
                ensure(k.is_finite(), || "k must be finite".into())?;
                Ok(PwlCurve::quasi_canard(k))
            }
            // the four-zone function is written for `-y + F`; in Liénard form f = -F
            PlanarShape::Arima { beta, delta, x0 } => Ok(PwlCurve::four_zone(beta, delta, x0)?.negated()),
        }
    }

    /// Horizontal distance between the two outer (attracting) branches at `y = 0`:
    /// the length of a relaxation jump when both outer slopes agree.
    pub fn branch_separation(&self) -> f64 {
        let Ok(curve) = self.curve() else { return f64::NAN };
        let segs = curve.segments();
        let (l, r) = (segs[0], segs[segs.len() - 1]);
        -r.intercept / r.slope + l.intercept / l.slope
    }
}

/// Planar Liénard system `eps x' = y - f(x)`, `y' = a - x`, optionally with `a' = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarSystem {
    pub shape: PlanarShape,
    pub a: f64,
    pub eps: f64,
    /// Slow drift `a' = c` (slow time); turns the system three-dimensional.
    pub drift: Option<f64>,
}

impl PlanarSystem {
    pub fn new(shape: PlanarShape, a: f64, eps: f64) -> Self {
        Self { shape, a, eps, drift: None }
    }

    pub fn drifted(mut self, c: f64) -> Self {
        self.drift = Some(c);
        self
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }
}

/// Planar (or drifted, three-dimensional) Liénard system in fast time.
pub fn build_planar(system: PlanarSystem) -> Result<SystemSpec> {
    ensure(system.eps.is_finite() && system.eps > 0.0, || {
        format!("eps must be positive, got {}", system.eps)
    })?;
    ensure(system.a.is_finite(), || "a must be finite".into())?;
    let curve = system.shape.curve()?;
    let e = system.eps;
    let (dim, zones) = match system.drift {
        None => (
            2,
            zones_from_curve(&curve, |seg| {
                let m = Matrix3::new(-seg.slope, 1.0, 0.0, -e, 0.0, 0.0, 0.0, 0.0, 0.0);
                (m, Vector3::new(-seg.intercept, e * system.a, 0.0))
            }),
        ),
        Some(c) => {
            ensure(c.is_finite(), || "drift c must be finite".into())?;
            (
                3,
                zones_from_curve(&curve, |seg| {
                    let m = Matrix3::new(-seg.slope, 1.0, 0.0, -e, 0.0, e, 0.0, 0.0, 0.0);
                    (m, Vector3::new(-seg.intercept, 0.0, e * c))
                }),
            )
        }
    };
    SystemSpec::new(dim, zones, e, Family::Planar { system })
}

/// Evaluate a PWL curve; kept as a free function for symmetry with the builders.
pub fn eval_pwl(curve: &PwlCurve, x: f64) -> f64 {
    curve.eval(x)
}

/// Parameters of a spec built by the minimal or global-return builders.
pub fn local_params(spec: &SystemSpec) -> Result<Params> {
    match spec.family() {
        Family::Minimal { params } | Family::GlobalReturn { params, .. } => Ok(*params),
        Family::Planar { .. } => Err(Error::Validation("planar systems have no (p1, p2, p3)".into())),
    }
}

/// The reversibility involution `R(x, y, z) = (-x, y, -z)`.
pub fn reflect(s: &State) -> State {
    State::new(-s[0], s[1], -s[2])
}
