//! Mixed-mode oscillations with a global return: central-zone spectrum,
//! Poincaré return maps on a switching plane, periodic-orbit detection and
//! `L^s` signatures.

use nalgebra::{Complex, Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{integrate_with, Control, IntegrateOptions, Termination, Trajectory};
use crate::model::{Family, Params, ReturnParams, State, SystemSpec};
use crate::planar::x_extrema;

/// Real parts at most this large (in magnitude) count as zero.
pub const SPECTRUM_TOL: f64 = 1e-12;
/// Default fixed-point tolerance of [`find_periodic_mmo`].
pub const MMO_TOL: f64 = 1e-8;
/// SAOs are `x`-maxima inside `|x| <= delta (1 + SAO_MARGIN)`.
pub const SAO_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralSpectrum {
    /// `(re, im)` pairs, sorted by imaginary part.
    pub eigenvalues: [(f64, f64); 3],
    pub max_abs_real: f64,
    pub rotating: bool,
    /// All real parts vanish (to [`SPECTRUM_TOL`]) and a rotating pair exists:
    /// SAOs of constant amplitude.
    pub constant_sao: bool,
}

/// Central-zone generator `[[0, -1, 0], [eps p1, 0, eps p2], [eps a1, eps a2, eps a3]]`.
pub fn central_generator(params: &Params, ret: &ReturnParams) -> Matrix3<f64> {
    let e = params.eps;
    Matrix3::new(
        0.0, -1.0, 0.0, //
        e * params.p1, 0.0, e * params.p2, //
        e * ret.alpha1, e * ret.alpha2, e * ret.alpha3,
    )
}

pub fn central_spectrum(params: &Params, ret: &ReturnParams) -> CentralSpectrum {
    let ev = central_generator(params, ret).complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = ev.iter().map(|c: &Complex<f64>| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let max_abs_real = eigenvalues.iter().map(|e| e.0.abs()).fold(0.0, f64::max);
    let rotating = eigenvalues.iter().any(|e| e.1.abs() > SPECTRUM_TOL);
    CentralSpectrum {
        eigenvalues: [eigenvalues[0], eigenvalues[1], eigenvalues[2]],
        max_abs_real,
        rotating,
        constant_sao: rotating && max_abs_real <= SPECTRUM_TOL,
    }
}

/// Section `{x = x, x' > 0}` (or `x' < 0` when `increasing` is false).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub x: f64,
    pub increasing: bool,
}

impl Section {
    /// Entry into the central zone, `{x = -delta, x increasing}`.
    pub fn central_entry(params: &Params) -> Self {
        Self { x: -params.delta, increasing: true }
    }
}

/// One application of the return map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    pub state: State,
    pub time: f64,
}

fn return_params(spec: &SystemSpec) -> Option<(Params, Option<ReturnParams>)> {
    match spec.family() {
        Family::Minimal { params } => Some((*params, None)),
        Family::GlobalReturn { params, ret } => Some((*params, Some(*ret))),
        Family::Planar { .. } => None,
    }
}

/// Default return-time budget: a few hundred slow time units.
pub fn default_horizon(spec: &SystemSpec) -> f64 {
    500.0 / spec.eps()
}

/// Next same-direction crossing of `section` from `s` (which should lie on it).
///
/// `None` when the orbit leaves the domain or does not come back within `horizon`.
pub fn poincare_map(spec: &SystemSpec, section: Section, s: &State, horizon: f64) -> Result<Option<Return>> {
    let split = spec.split_at(section.x);
    let Some(k) = split.zones().iter().position(|z| z.lo == section.x) else {
        return Err(Error::Validation(format!("section x = {} is not a switching plane", section.x)));
    };
    let (from, to) = if section.increasing { (k - 1, k) } else { (k, k - 1) };
    let mut hit = None;
    let opts = IntegrateOptions { domain_bound: 1e6, ..IntegrateOptions::sparse() };
    let traj = integrate_with(&split, s, horizon, &opts, |e| {
        if e.from == from && e.to == to && e.t > 0.0 {
            hit = Some(Return { state: e.state, time: e.t });
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if traj.termination == Termination::LeftDomain {
        return Ok(None);
    }
    Ok(hit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmoSignature {
    /// `(L, s)` pairs: `L` large excursions followed by `s` small ones.
    pub pairs: Vec<(u32, u32)>,
    /// SAOs are maxima with `|x|` below this.
    pub sao_window: f64,
    /// LAOs are entries into `x > lao_level`.
    pub lao_level: f64,
}

impl MmoSignature {
    /// `"1^3"`, `"1^2 2^1"`, ...
    pub fn notation(&self) -> String {
        self.pairs.iter().map(|(l, s)| format!("{l}^{s}")).collect::<Vec<_>>().join(" ")
    }
}

/// Time-ordered `'L'` / `'S'` events of a trajectory of a minimal or
/// global-return system.
pub fn oscillation_events(traj: &Trajectory, margin: f64) -> Result<(Vec<(f64, char)>, f64, f64)> {
    let spec = traj.spec().ok_or_else(|| Error::Validation("trajectory carries no system".into()))?;
    let (params, ret) = return_params(spec)
        .ok_or_else(|| Error::Validation("signatures are defined for the three-dimensional systems".into()))?;
    let window = params.delta * (1.0 + margin);
    let level = ret.map_or(f64::INFINITY, |r| r.x0);
    let mut events: Vec<(f64, char)> = x_extrema(traj, false)
        .into_iter()
        .filter(|&(_, x, is_max)| is_max && x.abs() <= window)
        .map(|(t, _, _)| (t, 'S'))
        .collect();
    for w in traj.segments.windows(2) {
        if w[1].s_in[0] == level && w[0].s_out[0] == level && spec.zone(w[1].zone).lo == level {
            events.push((w[1].t_in, 'L'));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((events, window, level))
}

fn group(events: &[char]) -> Vec<(u32, u32)> {
    let mut pairs: Vec<(u32, u32)> = vec![];
    for &c in events {
        match (c, pairs.last_mut()) {
            ('L', Some((l, 0))) => *l += 1,
            ('L', _) => pairs.push((1, 0)),
            (_, Some((_, s))) => *s += 1,
            (_, None) => pairs.push((0, 1)),
        }
    }
    pairs
}

/// Signature of a stretch of trajectory; leading SAOs (before any LAO) form a
/// `(0, s)` pair.
pub fn signature(traj: &Trajectory) -> Result<MmoSignature> {
    signature_with(traj, SAO_MARGIN, false)
}

/// Signature with an explicit SAO margin; `periodic` treats the events as one
/// period of a cycle and rotates them to start at an LAO.
pub fn signature_with(traj: &Trajectory, margin: f64, periodic: bool) -> Result<MmoSignature> {
    let (events, sao_window, lao_level) = oscillation_events(traj, margin)?;
    let mut chars: Vec<char> = events.iter().map(|e| e.1).collect();
    if periodic {
        if let Some(i) = chars.iter().position(|&c| c == 'L') {
            chars.rotate_left(i);
        }
    }
    Ok(MmoSignature { pairs: group(&chars), sao_window, lao_level })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Section crossing the orbit is anchored at.
    pub anchor: [f64; 3],
    pub period: f64,
    /// `|P(anchor) - anchor|_inf`.
    pub residual: f64,
    /// Eigenvalues `(re, im)` of the finite-difference Jacobian of the return
    /// map in section coordinates `(y, z)`.
    pub multipliers: [(f64, f64); 2],
    pub signature: MmoSignature,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmoOptions {
    pub section: Option<Section>,
    /// Plain iterations of the return map before the Newton solve.
    pub burn_in: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Return-time budget per map application; default [`default_horizon`].
    pub horizon: Option<f64>,
}

impl Default for MmoOptions {
    fn default() -> Self {
        Self { section: None, burn_in: 20, tol: MMO_TOL, max_iter: 50, horizon: None }
    }
}

/// Outcome of [`find_periodic_mmo`]: the orbit, or why there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmoSearch {
    pub orbit: Option<PeriodicOrbit>,
    pub diagnostic: Option<String>,
    pub last_iterate: Option<[f64; 3]>,
}

impl MmoSearch {
    fn failed(why: String, last: Option<State>) -> Self {
        Self { orbit: None, diagnostic: Some(why), last_iterate: last.map(|s| [s[0], s[1], s[2]]) }
    }
}

/// The shipped demo: folded-node local parameters `(1, -1, 0.2)`, `eps = 0.01`,
/// with a return that lowers `z` on the left branch (`alpha1 > 0`) and is
/// stabilised by `alpha3 < -alpha1`. Found by a coarse grid over
/// `(alpha1, alpha3, xi)`; its attracting orbit has signature `1^3`.
/// Mirrored in `configs/mmo_demo.json`.
pub fn demo_system() -> (Params, ReturnParams, State) {
    let params = Params::new(1.0, -1.0, 0.2, 0.01);
    let ret = ReturnParams { alpha1: 2.0, alpha2: 0.0, alpha3: -2.3, kappa: 0.0, zeta: 0.0, xi: 0.0, x0: 1.0 };
    let seed = State::new(-0.6, 0.6 - params.delta, -0.1);
    (params, ret, seed)
}

/// Integrate from `s` until the first zone switch (or `horizon`), sampled at
/// [`mmo_sample_step`]. Started inside the central zone this is one transit.
pub fn central_transit(spec: &SystemSpec, s: &State, horizon: f64) -> Result<Trajectory> {
    let (params, _) = return_params(spec)
        .ok_or_else(|| Error::Validation("central transits are defined for the three-dimensional systems".into()))?;
    let opts = IntegrateOptions { sample_step: Some(mmo_sample_step(&params)), ..IntegrateOptions::default() };
    integrate_with(spec, s, horizon, &opts, |_| Control::Stop)
}

/// `(max - min) / mean` of a set of amplitudes; `NaN` when empty.
pub fn relative_spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (hi - lo) / mean.abs()
}

/// Sample step fine enough to resolve the central rotation.
pub fn mmo_sample_step(params: &Params) -> f64 {
    let w = (params.eps * params.p1.abs()).sqrt().max(params.eps);
    2.0 * std::f64::consts::PI / w / 128.0
}

/// First crossing of `section` from an arbitrary state.
fn first_crossing(spec: &SystemSpec, section: Section, s: &State, horizon: f64) -> Result<Option<Return>> {
    // a state away from the section: the split spec reports the first crossing
    // like any other return
    poincare_map(spec, section, s, horizon)
}

/// Periodic MMO through the section, by burn-in then damped Newton on the
/// section coordinates `(y, z)` with a finite-difference Jacobian.
pub fn find_periodic_mmo(spec: &SystemSpec, seed: &State, opts: &MmoOptions) -> Result<MmoSearch> {
    let (params, _) = return_params(spec)
        .ok_or_else(|| Error::Validation("periodic MMOs need a three-dimensional system".into()))?;
    let section = opts.section.unwrap_or_else(|| Section::central_entry(&params));
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(spec));
    let on = |u: Vector2<f64>| State::new(section.x, u[0], u[1]);
    let map = |u: Vector2<f64>| -> Result<Option<(Vector2<f64>, f64)>> {
        Ok(poincare_map(spec, section, &on(u), horizon)?.map(|r| (Vector2::new(r.state[1], r.state[2]), r.time)))
    };

    let Some(start) = first_crossing(spec, section, seed, horizon)? else {
        return Ok(MmoSearch::failed("the seed never reaches the section".into(), Some(*seed)));
    };
    let mut u = Vector2::new(start.state[1], start.state[2]);
    for i in 0..opts.burn_in {
        match map(u)? {
            Some((v, _)) => u = v,
            None => {
                return Ok(MmoSearch::failed(format!("no return during burn-in (iteration {i})"), Some(on(u))));
            }
        }
    }

    let residual_at = |u: Vector2<f64>| -> Result<Option<(Vector2<f64>, f64)>> {
        Ok(map(u)?.map(|(v, t)| (v - u, t)))
    };
    let jacobian = |u: Vector2<f64>, g: Vector2<f64>| -> Result<Option<Matrix2<f64>>> {
        let mut jac = Matrix2::zeros();
        for j in 0..2 {
            let h = 1e-7 * u[j].abs().max(1e-3);
            let mut up = u;
            up[j] += h;
            let Some((gp, _)) = residual_at(up)? else { return Ok(None) };
            jac.set_column(j, &((gp - g) / h));
        }
        Ok(Some(jac))
    };

    let Some((mut g, mut period)) = residual_at(u)? else {
        return Ok(MmoSearch::failed("no return after burn-in".into(), Some(on(u))));
    };
    let mut iterations = 0;
    while g.amax() > opts.tol {
        if iterations == opts.max_iter {
            return Ok(MmoSearch::failed(
                format!("no convergence after {} Newton steps (residual {:e})", opts.max_iter, g.amax()),
                Some(on(u)),
            ));
        }
        iterations += 1;
        let Some(jac) = jacobian(u, g)? else {
            return Ok(MmoSearch::failed("no return while differencing the map".into(), Some(on(u))));
        };
        let Some(step) = jac.lu().solve(&(-g)) else {
            return Ok(MmoSearch::failed("singular Jacobian of P - id".into(), Some(on(u))));
        };
        // backtracking on the residual norm; a plain map iterate is the fallback
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-4 {
            let trial = u + lambda * step;
            if let Some((gt, t)) = residual_at(trial)? {
                if gt.amax() < g.amax() {
                    accepted = Some((trial, gt, t));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let (nu, ng, nt) = match accepted {
            Some(a) => a,
            None => {
                let v = u + g;
                match residual_at(v)? {
                    Some((gv, t)) => (v, gv, t),
                    None => return Ok(MmoSearch::failed("orbit escaped during the solve".into(), Some(on(u)))),
                }
            }
        };
        u = nu;
        g = ng;
        period = nt;
    }

    let jac = jacobian(u, g)?.map(|j| j + Matrix2::identity()).unwrap_or_else(Matrix2::zeros);
    let ev = jac.complex_eigenvalues();
    let multipliers = [(ev[0].re, ev[0].im), (ev[1].re, ev[1].im)];
    let anchor = on(u);
    let orbit = one_period(spec, &anchor, period)?;
    let signature = signature_with(&orbit, SAO_MARGIN, true)?;
    Ok(MmoSearch {
        orbit: Some(PeriodicOrbit {
            anchor: [anchor[0], anchor[1], anchor[2]],
            period,
            residual: g.amax(),
            multipliers,
            signature,
            iterations,
        }),
        diagnostic: None,
        last_iterate: Some([anchor[0], anchor[1], anchor[2]]),
    })
}

/// Dense trajectory over one period from the anchor.
pub fn one_period(spec: &SystemSpec, anchor: &State, period: f64) -> Result<Trajectory> {
    let (params, _) = return_params(spec)
        .ok_or_else(|| Error::Validation("periodic MMOs need a three-dimensional system".into()))?;
    let opts = IntegrateOptions { sample_step: Some(mmo_sample_step(&params)), ..IntegrateOptions::default() };
    integrate_with(spec, anchor, period, &opts, |_| Control::Continue)
}

/// `x`-ranges of the SAOs of a trajectory: for each SAO maximum, the distance
/// to the preceding minimum.
pub fn sao_amplitudes(traj: &Trajectory, margin: f64) -> Result<Vec<f64>> {
    let spec = traj.spec().ok_or_else(|| Error::Validation("trajectory carries no system".into()))?;
    let (params, _) = return_params(spec)
        .ok_or_else(|| Error::Validation("SAOs are defined for the three-dimensional systems".into()))?;
    let window = params.delta * (1.0 + margin);
    let ex = x_extrema(traj, false);
    Ok(ex
        .windows(2)
        .filter(|w| !w[0].2 && w[1].2 && w[1].1.abs() <= window && w[0].1.abs() <= window)
        .map(|w| w[1].1 - w[0].1)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_node() -> Params {
        Params::new(1.0, -1.0, 0.2, 0.01)
    }

    fn ret(a1: f64, a2: f64, a3: f64) -> ReturnParams {
        ReturnParams { alpha1: a1, alpha2: a2, alpha3: a3, kappa: 0.0, zeta: 0.0, xi: 0.0, x0: 1.0 }
    }

    #[test]
    fn uncoupled_spectrum_is_pure_rotation() {
        let s = central_spectrum(&base_node(), &ret(0.0, 0.0, 0.0));
        assert!(s.constant_sao);
        assert!((s.eigenvalues[2].1 - 0.1).abs() < 1e-15);
        assert!((s.eigenvalues[0].1 + 0.1).abs() < 1e-15);
    }

    #[test]
    fn constant_sao_spectrum() {
        let p = base_node();
        let s = central_spectrum(&p, &ret(0.0, 0.1, 0.0));
        let w = (p.eps * p.p1 - p.eps * p.eps * p.p2 * 0.1).sqrt();
        assert!(s.constant_sao);
        assert!((s.eigenvalues[2].1 - w).abs() < 1e-15, "{:?}", s.eigenvalues);
        assert!((w - 0.100_050_0).abs() < 1e-7);
    }

    #[test]
    fn damping_breaks_constant_amplitude() {
        let s = central_spectrum(&base_node(), &ret(0.0, 0.1, 0.05));
        assert!(s.max_abs_real > SPECTRUM_TOL);
        assert!(!s.constant_sao);
    }

    #[test]
    fn grouping() {
        assert_eq!(group(&['L', 'S', 'S', 'L', 'S']), vec![(1, 2), (1, 1)]);
        assert_eq!(group(&['S', 'S', 'S']), vec![(0, 3)]);
        assert_eq!(group(&['L', 'L', 'S']), vec![(2, 1)]);
        assert_eq!(group(&['L']), vec![(1, 0)]);
        let sig = MmoSignature { pairs: vec![(1, 3)], sao_window: 0.0, lao_level: 0.0 };
        assert_eq!(sig.notation(), "1^3");
    }
}
