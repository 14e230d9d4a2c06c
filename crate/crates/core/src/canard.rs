//! Maximal canards of the minimal system.
//!
//! Candidates come from the transcendental equation
//! `tan(theta) = 2 |lambda_A| sqrt(eps p1) Q(z)`, `theta = -2 sqrt(p1) z / (p3 sqrt(eps))`,
//! restricted to the trace `L^A` of the attracting slow manifold. Each candidate
//! is kept only if the full cos/sin system holds and an independent flow of the
//! orbit confirms reversibility, residence in the central zone and its winding.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lambda_a, max_winding, rotation_axis, slow_manifolds, SlowManifolds};
use crate::hybrid::{integrate_with, winding_number, Control, IntegrateOptions};
use crate::model::{build_minimal_3d, reflect, Params, State};
use crate::zoneflow::central_closed_form;

pub const REVERSIBILITY_TOL: f64 = 1e-8;
pub const RESIDENCE_RTOL: f64 = 1e-10;
pub const ROOT_TOL: f64 = 1e-12;
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanardSolution {
    /// Winding index: number of complete turns around the axis.
    pub k: u64,
    /// Entry point on the left switching plane.
    pub entry: [f64; 3],
    /// State reached after the flight time.
    pub exit: [f64; 3],
    /// `t(p) = -2 z / (eps p3)`.
    pub flight_time: f64,
    /// Transit time measured by the hybrid integrator.
    pub transit_time: f64,
    pub winding: u64,
    /// Normalised residual of the tangent equation at the root.
    pub residual: f64,
    pub reversibility_error: f64,
    pub max_abs_x: f64,
    pub reversible: bool,
    pub resident: bool,
}

impl CanardSolution {
    pub fn entry_state(&self) -> State {
        State::from(self.entry)
    }

    pub fn exit_state(&self) -> State {
        State::from(self.exit)
    }

    pub fn is_valid(&self) -> bool {
        self.reversible && self.resident && self.winding == self.k && self.residual <= ROOT_TOL
    }
}

/// Zeros, poles and bracket grids of the rational function `Q(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootScaffold {
    pub z1: f64,
    pub z2: f64,
    /// Poles (`None` when the denominator has no real roots, e.g. `p1 < 0`).
    pub pole1: Option<f64>,
    pub pole2: Option<f64>,
    /// Spacing unit `p3 sqrt(eps) / sqrt(|p1|) * pi / 2` of the tangent grid.
    pub grid_unit: f64,
}

impl RootScaffold {
    /// Zero `r_k` of the tangent.
    pub fn r(&self, k: u64) -> f64 {
        -(k as f64) * self.grid_unit
    }

    /// Vertical asymptote `r~_k` of the tangent.
    pub fn r_tilde(&self, k: u64) -> f64 {
        -((2 * k + 1) as f64) / 2.0 * self.grid_unit
    }
}

/// Amplitude of the invariant cylinder containing `gamma_k`.
pub fn cylinder_amplitude(params: &Params, k: u64) -> f64 {
    let Params { p1, p2, p3, delta, .. } = *params;
    delta * (1.0 + p2 * p3 / (p1 * p1.sqrt()) * (k as f64 + 0.5))
}

struct QParts {
    num: f64,
    den: f64,
}

fn q_parts(params: &Params, la: f64, z: f64) -> (f64, f64, QParts) {
    let Params { p1, p2, p3, eps, delta } = *params;
    let n1 = p1 * p2 * z - delta * p1 * p1 - p2 * p3;
    let n2 = p2 * z - delta * p1;
    let den = eps * n1 * n1 - la * la * p1 * n2 * n2;
    (n1, n2, QParts { num: n1 * n2, den })
}

pub fn root_scaffold(params: &Params) -> Result<RootScaffold> {
    let la = lambda_a(params)?;
    let Params { p1, p2, p3, eps, delta } = *params;
    if p2 == 0.0 {
        return Err(Error::Degenerate("p2 = 0 (FSN-I): Q has no finite zeros".into()));
    }
    let z1 = delta * p1 / p2;
    let z2 = delta * p1 / p2 + p3 / p1;
    let (pole1, pole2) = if p1 > 0.0 {
        // den = (sqrt(eps) n1 - a n2)(sqrt(eps) n1 + a n2), a = |lambda_A| sqrt(p1)
        let a = la.abs() * p1.sqrt();
        let se = eps.sqrt();
        let root = |s: f64| (se * (delta * p1 * p1 + p2 * p3) - s * a * delta * p1) / (se * p1 * p2 - s * a * p2);
        let (r1, r2) = (root(1.0), root(-1.0));
        let expect = z1 + p3 / p1.sqrt() * se;
        if (r1 - expect).abs() <= (r2 - expect).abs() {
            (Some(r1), Some(r2))
        } else {
            (Some(r2), Some(r1))
        }
    } else {
        (None, None)
    };
    Ok(RootScaffold { z1, z2, pole1, pole2, grid_unit: p3 * eps.sqrt() / p1.abs().sqrt() * PI / 2.0 })
}

/// The rational function `Q(z)`; fails within `1e-12` of a pole.
pub fn q_rational(params: &Params, z: f64) -> Result<f64> {
    let la = lambda_a(params)?;
    let sc = root_scaffold(params)?;
    for pole in [sc.pole1, sc.pole2].into_iter().flatten() {
        if (z - pole).abs() < POLE_TOL * pole.abs().max(1.0) {
            return Err(Error::PoleProximity { z, pole });
        }
    }
    let (_, _, q) = q_parts(params, la, z);
    Ok(q.num / q.den)
}

fn theta(params: &Params, z: f64) -> f64 {
    -2.0 * params.p1.abs().sqrt() * z / (params.p3 * params.eps.sqrt())
}

fn z_of_theta(params: &Params, th: f64) -> f64 {
    -th * params.p3 * params.eps.sqrt() / (2.0 * params.p1.abs().sqrt())
}

/// `tan(theta) - 2 |lambda_A| sqrt(eps p1) Q(z)` for `p1 > 0`.
pub fn tan_equation(params: &Params, z: f64) -> Result<f64> {
    let la = lambda_a(params)?;
    let (_, _, q) = q_parts(params, la, z);
    let c = 2.0 * la.abs() * (params.eps * params.p1).sqrt();
    Ok(theta(params, z).tan() - c * q.num / q.den)
}

/// Pole-free form `sin(theta) D(z) - c N(z) cos(theta)` of the tangent equation.
pub fn tan_equation_cleared(params: &Params, z: f64) -> Result<f64> {
    let la = lambda_a(params)?;
    let (_, _, q) = q_parts(params, la, z);
    let c = 2.0 * la.abs() * (params.eps * params.p1).sqrt();
    let (s, co) = theta(params, z).sin_cos();
    Ok(s * q.den - c * q.num * co)
}

/// Pole-free form of the hyperbolic equation for `p1 < 0`:
/// `tanh(theta) 2 sqrt(eps |p1|) |lambda_A| N(z) - D(z)`.
pub fn tanh_equation_cleared(params: &Params, z: f64) -> Result<f64> {
    let la = lambda_a(params)?;
    let (_, _, q) = q_parts(params, la, z);
    let c = 2.0 * la.abs() * (params.eps * params.p1.abs()).sqrt();
    Ok(theta(params, z).tanh() * c * q.num - q.den)
}

/// Normalised residual of the tangent equation.
fn tan_residual(params: &Params, la: f64, z: f64) -> f64 {
    let (_, _, q) = q_parts(params, la, z);
    let c = 2.0 * la.abs() * (params.eps * params.p1).sqrt();
    let t = theta(params, z).tan();
    (t - c * q.num / q.den).abs() / t.abs().max(1.0)
}

/// Both equations of the cos/sin system agree with the angle (not its opposite).
fn satisfies_cos_sin(params: &Params, la: f64, z: f64) -> bool {
    let (n1, n2, _) = q_parts(params, la, z);
    let Params { p1, eps, .. } = *params;
    let a = eps * n1 * n1;
    let b = la * la * p1 * n2 * n2;
    let cos_rhs = (a - b) / (a + b);
    let sin_rhs = -2.0 * la * (eps * p1).sqrt() * n1 * n2 / (a + b);
    let (s, c) = theta(params, z).sin_cos();
    c * cos_rhs + s * sin_rhs > 0.0
}

/// A root of the transcendental equation before flow validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub z: f64,
    pub y: f64,
    pub residual: f64,
    pub cos_sin_consistent: bool,
}

/// Output of the full search: validated canards plus what was rejected and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanardSearch {
    pub canards: Vec<CanardSolution>,
    pub candidates: Vec<Candidate>,
    /// Candidates that passed the cos/sin filter but failed flow validation.
    pub rejected: Vec<CanardSolution>,
    pub warnings: Vec<String>,
}

/// Admissible window of entry heights `z` (always negative).
fn admissible_window(params: &Params, sm: &SlowManifolds, sc: &RootScaffold) -> (f64, f64) {
    let Params { p1, p2, p3, .. } = *params;
    if p1 > 0.0 && p2 < 0.0 {
        // entry points must lie on the segment of L^A with z >= z*_A; the pole of Q
        // inside that range is cut out by the branch splitting
        (sm.z_star_a, 0.0)
    } else if p1 > 0.0 {
        // folded saddle: no lower bound; look a few turns past the winding bound
        let turns = max_winding(p1, p2, p3).map_or(4.0, |m| m.floor() + 3.0);
        (z_of_theta(params, 2.0 * PI * turns + PI), 0.0)
    } else {
        let lo = sm.z_star_a - 1e3 * sc.grid_unit.max(sm.z_star_a.abs());
        (lo, sm.z_star_a.min(0.0))
    }
}

/// Maximal canards entering the central zone from `L^A` (validated only).
pub fn maximal_canards(params: &Params) -> Result<Vec<CanardSolution>> {
    Ok(canard_search(params)?.canards)
}

pub fn canard_search(params: &Params) -> Result<CanardSearch> {
    params.validate()?;
    let Params { p1, p2, p3, .. } = *params;
    if p2 == 0.0 || p3 == 0.0 {
        return Err(Error::Degenerate(
            "fold saddle-node parameters (p2 p3 = 0): use the singular portraits instead".into(),
        ));
    }
    if p3 < 0.0 {
        // (x, y, z) -> (x, y, -z) maps the system with (p2, p3) to (-p2, -p3)
        let mirrored = Params { p2: -p2, p3: -p3, ..*params };
        let mut out = canard_search(&mirrored)?;
        let flip = |a: &mut [f64; 3]| a[2] = -a[2];
        for c in out.canards.iter_mut().chain(out.rejected.iter_mut()) {
            flip(&mut c.entry);
            flip(&mut c.exit);
        }
        for c in &mut out.candidates {
            c.z = -c.z;
        }
        return Ok(out);
    }
    if p1 == 0.0 {
        return Err(Error::NoRotation { p1 });
    }
    let sm = slow_manifolds(params)?;
    let sc = root_scaffold(params)?;
    let la = sm.lambda_a;
    if p1 < 0.0 && p2 < 0.0 {
        // both lines lie where no orbit can connect them while z increases
        return Ok(CanardSearch { canards: vec![], candidates: vec![], rejected: vec![], warnings: vec![] });
    }
    let window = admissible_window(params, &sm, &sc);
    let roots = if p1 > 0.0 { tan_roots(params, &sc, la, window) } else { scan_roots(params, window, 10_000) };
    let candidates: Vec<Candidate> = roots
        .into_iter()
        .map(|z| Candidate {
            z,
            y: sm.line_a.y_at(z),
            residual: if p1 > 0.0 { tan_residual(params, la, z) } else { 0.0 },
            cos_sin_consistent: p1 < 0.0 || satisfies_cos_sin(params, la, z),
        })
        .collect();
    let checked: Vec<CanardSolution> = candidates
        .par_iter()
        .filter(|c| c.cos_sin_consistent)
        .map(|c| validate(params, c))
        .collect::<Result<_>>()?;
    let (mut canards, rejected): (Vec<_>, Vec<_>) = checked.into_iter().partition(|c| c.is_valid());
    canards.sort_by_key(|c| c.k);
    let mut warnings = vec![];
    for w in canards.windows(2) {
        if (w[0].flight_time - w[1].flight_time).abs() <= 1e-10 * w[0].flight_time {
            warnings.push(format!("canards k={} and k={} share a flight time", w[0].k, w[1].k));
        }
    }
    Ok(CanardSearch { canards, candidates, rejected, warnings })
}

/// Roots of the tangent equation in `window`, one search per monotone tangent branch.
fn tan_roots(params: &Params, sc: &RootScaffold, la: f64, (lo, hi): (f64, f64)) -> Vec<f64> {
    let th_max = theta(params, lo);
    let branches = (th_max / (PI / 2.0)).ceil() as usize;
    let poles: Vec<f64> = [sc.pole1, sc.pole2].into_iter().flatten().collect();
    (0..branches)
        .into_par_iter()
        .flat_map_iter(|j| {
            let (tha, thb) = (j as f64 * PI / 2.0, (j + 1) as f64 * PI / 2.0);
            // z decreases as theta grows
            let (za, zb) = (z_of_theta(params, thb).max(lo), z_of_theta(params, tha).min(hi));
            let mut cuts = vec![za, zb];
            cuts.extend(poles.iter().copied().filter(|&p| p > za && p < zb));
            cuts.sort_by(f64::total_cmp);
            let mut found = vec![];
            for w in cuts.windows(2) {
                found.extend(branch_roots(params, la, w[0], w[1]));
            }
            found
        })
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect()
}

/// Roots on a sub-interval where the equation is continuous: a sign scan over
/// `BRANCH_SAMPLES` points (a pole of `Q` at an end can hide a pair of roots),
/// then bisection and one Newton polish per sign change.
fn branch_roots(params: &Params, la: f64, a: f64, b: f64) -> Vec<f64> {
    const BRANCH_SAMPLES: usize = 64;
    if !(b > a) {
        return vec![];
    }
    let f = |z: f64| {
        let (_, _, q) = q_parts(params, la, z);
        let c = 2.0 * la.abs() * (params.eps * params.p1).sqrt();
        theta(params, z).tan() - c * q.num / q.den
    };
    let shrink = (b - a) * 1e-10;
    let (a, b) = (a + shrink, b - shrink);
    let zs: Vec<f64> = (0..=BRANCH_SAMPLES).map(|i| a + (b - a) * i as f64 / BRANCH_SAMPLES as f64).collect();
    let mut out = vec![];
    for w in zs.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
            continue;
        }
        let lo_sign = flo.signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid).signum() == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        // one Newton step with a central-difference derivative, kept only if it helps
        let h = (hi - lo).max(z.abs() * 1e-9);
        let d = (f(z + h) - f(z - h)) / (2.0 * h);
        let zn = z - f(z) / d;
        out.push(if zn.is_finite() && f(zn).abs() < f(z).abs() && (zn - z).abs() <= h { zn } else { z });
    }
    out
}

/// Dense sign-change scan of the pole-free equation (tangent for `p1 > 0`,
/// hyperbolic tangent for `p1 < 0`); each sign change refined by bisection.
pub fn scan_roots(params: &Params, (lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let g = |z: f64| {
        if params.p1 > 0.0 {
            tan_equation_cleared(params, z).unwrap_or(f64::NAN)
        } else {
            tanh_equation_cleared(params, z).unwrap_or(f64::NAN)
        }
    };
    let mut roots = vec![];
    let zs: Vec<f64> = (0..=n).map(|i| hi - (hi - lo) * i as f64 / n as f64).collect();
    for w in zs.windows(2) {
        let (mut a, mut b) = (w[1], w[0]);
        let (ga, gb) = (g(a), g(b));
        if !(ga.is_finite() && gb.is_finite()) || ga == 0.0 && gb == 0.0 {
            continue;
        }
        if ga == 0.0 {
            roots.push(a);
            continue;
        }
        if ga.signum() == gb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if g(m).signum() == ga.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    roots
}

/// Flow a candidate through the central zone and check what a maximal canard must satisfy.
fn validate(params: &Params, cand: &Candidate) -> Result<CanardSolution> {
    let spec = build_minimal_3d(*params)?;
    let p = State::new(-params.delta, cand.y, cand.z);
    let flight_time = -2.0 * cand.z / (params.eps * params.p3);
    let exit = central_closed_form(params, &p, flight_time);
    let reversibility_error = (exit - reflect(&p)).amax();
    let max_abs_x = max_abs_x(params, &p, flight_time);
    let mut first = None;
    let traj = integrate_with(&spec, &p, 2.0 * flight_time, &IntegrateOptions::sparse(), |e| {
        first = Some(*e);
        Control::Stop
    })?;
    let transit_time = first.map_or(f64::INFINITY, |e| e.t);
    let winding = if params.p1 > 0.0 { winding_number(&traj, params)?.turns } else { 0 };
    let k = (params.omega() * flight_time / (2.0 * PI)).floor().max(0.0) as u64;
    Ok(CanardSolution {
        k,
        entry: p.into(),
        exit: exit.into(),
        flight_time,
        transit_time,
        winding,
        residual: cand.residual,
        reversibility_error,
        max_abs_x,
        reversible: reversibility_error <= REVERSIBILITY_TOL,
        resident: max_abs_x <= params.delta * (1.0 + RESIDENCE_RTOL)
            && (transit_time - flight_time).abs() <= 1e-8 * flight_time,
    })
}

/// `sup |x(t)|` over `[0, t_end]` along the central flow, with refined extrema.
pub fn max_abs_x(params: &Params, p: &State, t_end: f64) -> f64 {
    let x = |t: f64| central_closed_form(params, p, t)[0].abs();
    let period = if params.p1 > 0.0 { 2.0 * PI / params.omega() } else { t_end };
    let n = ((t_end / period) * 256.0).ceil().max(256.0) as usize;
    let h = t_end / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| x(i as f64 * h)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for i in 1..n {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] {
            // golden-section refinement of the local maximum
            let (mut a, mut b) = ((i - 1) as f64 * h, (i + 1) as f64 * h);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if x(c) > x(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best = best.max(x(0.5 * (a + b)));
        }
    }
    best
}

/// Truncated series for the entry point of `gamma_k`.
pub fn canard_coordinates_leading(params: &Params, k: u64) -> (f64, f64) {
    let Params { p1, p2, p3, eps, .. } = *params;
    let kh = k as f64 + 0.5;
    let y = -(kh * p2 * p3 / p1.sqrt() + p1) * PI * eps.powf(1.5) - p2 * p3 * eps * eps;
    let z = -kh * p3 / p1.sqrt() * PI * eps.sqrt();
    (y, z)
}

/// Explicit maximal canard obtained for the special half-width `delta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedCanard {
    pub k: u64,
    pub delta_k: f64,
    pub entry: [f64; 3],
    pub flight_time: f64,
    /// The minimal-system parameters with `delta = delta_k`.
    pub params: Params,
}

impl SelectedCanard {
    /// Closed-form point at time `t` in `[0, flight_time]`.
    ///
    /// With `A = p2 p3 / p1^2` and `w = sqrt(eps p1)`:
    /// `x = A cos(w t) - w A (w t - (k + 1/2) pi)`, `y = -x' = A w (sin(w t) + w)`,
    /// `z = z_k + eps p3 t`.
    pub fn eval(&self, t: f64) -> State {
        let Params { p1, p2, p3, eps, .. } = self.params;
        let a = p2 * p3 / (p1 * p1);
        let w = (eps * p1).sqrt();
        let kh = self.k as f64 + 0.5;
        let x = a * (w * t).cos() - w * a * (w * t - kh * PI);
        let y = a * w * ((w * t).sin() + w);
        let z = self.entry[2] + eps * p3 * t;
        State::new(x, y, z)
    }

    pub fn entry_state(&self) -> State {
        State::from(self.entry)
    }
}

/// `delta_k = -(p2 p3 / p1^2) ((k + 1/2) pi sqrt(eps p1) + 1)` and its explicit canard.
///
/// `params.delta` is ignored.
pub fn selected_canard(params: &Params, k: u64) -> Result<SelectedCanard> {
    let Params { p1, p2, p3, eps, .. } = *params;
    if !(p1 > 0.0 && p2 < 0.0 && p3 > 0.0) {
        return Err(Error::Validation(format!(
            "selected canards need p1 > 0, p2 < 0, p3 > 0 (got {p1}, {p2}, {p3})"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    let mu = max_winding(p1, p2, p3)?;
    if k as f64 > mu.floor() {
        return Err(Error::Validation(format!("k = {k} exceeds the winding bound floor(mu) = {}", mu.floor())));
    }
    let w = (eps * p1).sqrt();
    let kh = k as f64 + 0.5;
    let delta_k = -(p2 * p3 / (p1 * p1)) * (kh * PI * w + 1.0);
    let entry = [-delta_k, eps * p2 * p3 / p1, -kh * PI * (p3 / p1) * w];
    Ok(SelectedCanard {
        k,
        delta_k,
        entry,
        flight_time: (2 * k + 1) as f64 * PI / w,
        params: Params { delta: delta_k, ..*params },
    })
}

/// Distance in `{x = delta}` between the axis endpoint and the line `L^R`.
pub fn weak_canard_gap(params: &Params) -> Result<f64> {
    let sm = slow_manifolds(params)?;
    let axis = rotation_axis(params)?;
    let end = axis
        .point_at_x(params.delta)
        .ok_or_else(|| Error::Degenerate("p2 = 0: the axis does not reach the switching plane".into()))?;
    Ok(sm.line_r.distance(end[1], end[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_node() -> Params {
        Params::new(1.0, -1.0, 0.2, 0.01)
    }

    #[test]
    fn q_zeros_and_asymptote() {
        let p = base_node();
        let sc = root_scaffold(&p).unwrap();
        assert!(q_rational(&p, sc.z1).unwrap().abs() < 1e-15);
        assert!(q_rational(&p, sc.z2).unwrap().abs() < 1e-15);
        let la = lambda_a(&p).unwrap();
        let limit = 1.0 / (p.eps * p.p1 - la * la);
        assert_relative_eq!(q_rational(&p, 1e6).unwrap(), limit, max_relative = 1e-5);
        assert_relative_eq!(limit, -1.031_036_307_982_877, max_relative = 1e-12);
        assert!(matches!(q_rational(&p, sc.pole1.unwrap()), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn pole_expansion() {
        let p = Params::new(1.0, -1.0, 0.2, 1e-4);
        let sc = root_scaffold(&p).unwrap();
        let lead = sc.z1 + p.p3 * p.eps.sqrt();
        assert!((sc.pole1.unwrap() - lead).abs() < 10.0 * p.eps);
    }

    #[test]
    fn bracket_ordering() {
        let sc = root_scaffold(&base_node()).unwrap();
        for k in 1..6 {
            assert!(sc.r_tilde(k) < sc.r(k) && sc.r(k) < 0.0);
        }
        assert!(cylinder_amplitude(&base_node(), 2) < base_node().delta);
        assert!(cylinder_amplitude(&Params::new(1.0, 1.0, 0.1, 0.01), 2) > base_node().delta);
    }

    #[test]
    fn leading_coordinates() {
        let (y, z) = canard_coordinates_leading(&base_node(), 0);
        assert_relative_eq!(z, -0.031_415_926_535_897_93, epsilon = 1e-15);
        assert_relative_eq!(y, -0.9 * PI * 0.001 + 0.00002, epsilon = 1e-15);
    }

    #[test]
    fn base_node_canards() {
        let p = base_node();
        let found = maximal_canards(&p).unwrap();
        let ks: Vec<u64> = found.iter().map(|c| c.k).collect();
        // the first pole of Q cuts off the bracket where k = 4 would sit
        assert_eq!(ks, [0, 1, 2, 3]);
        assert!((found[0].entry[2] + 0.0314159).abs() < p.eps);
        for eps in [1e-3, 1e-4] {
            let ks: Vec<u64> = maximal_canards(&Params { eps, ..Params::new(1.0, -1.0, 0.2, eps) })
                .unwrap()
                .iter()
                .map(|c| c.k)
                .collect();
            assert_eq!(ks, [0, 1, 2, 3], "eps = {eps}");
        }
    }

    #[test]
    fn saddle_has_one_canard() {
        let found = maximal_canards(&Params::new(1.0, 1.0, 0.1, 0.01)).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].k, 0);
    }

    #[test]
    fn no_canards_for_negative_p1() {
        assert!(maximal_canards(&Params::new(-1.0, 1.0, 0.1, 0.01)).unwrap().is_empty());
        assert!(maximal_canards(&Params::new(-1.0, -1.0, 0.1, 0.01)).unwrap().is_empty());
    }

    #[test]
    fn fsn_rejected() {
        assert!(matches!(maximal_canards(&Params::new(1.0, 0.0, 0.1, 0.01)), Err(Error::Degenerate(_))));
        assert!(matches!(maximal_canards(&Params::new(1.0, -1.0, 0.0, 0.01)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn negative_p3_mirrors() {
        let a = maximal_canards(&Params::new(1.0, -1.0, 0.2, 0.01)).unwrap();
        let b = maximal_canards(&Params::new(1.0, 1.0, -0.2, 0.01)).unwrap();
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(u.entry[2], -v.entry[2]);
        }
    }

    #[test]
    fn selected_canard_values() {
        let sc = selected_canard(&base_node(), 0).unwrap();
        assert_relative_eq!(sc.delta_k, 0.2 * (0.05 * PI + 1.0), epsilon = 1e-15);
        assert_relative_eq!(sc.entry[1], -0.002, epsilon = 1e-16);
        assert_relative_eq!(sc.entry[2], -0.031_415_926_535_897_93, epsilon = 1e-15);
        assert_eq!(sc.eval(0.0)[0], -sc.delta_k);
        assert!((sc.eval(0.0) - sc.entry_state()).amax() < 1e-16);
        assert!(selected_canard(&base_node(), 6).is_err());
    }

    #[test]
    fn selected_canard_entry_on_attracting_line() {
        for k in 0..4 {
            let sc = selected_canard(&base_node(), k).unwrap();
            let sm = slow_manifolds(&sc.params).unwrap();
            assert!((sm.line_a.y_at(sc.entry[2]) - sc.entry[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn weak_gap_is_order_eps() {
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| weak_canard_gap(&Params::new(1.0, -1.0, 0.2, e)).unwrap() / e)
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 1.1, "{ratios:?}");
        assert!(ratios[0] > 0.0);
    }
}
