//! Closed-form invariant objects of the minimal system: slow manifolds, their
//! traces on the switching planes, the rotation axis, the winding bound and
//! the folded-singularity classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Params, State};

/// The plane `a x + b y + c z = d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    pub fn residual(&self, s: &State) -> f64 {
        self.a * s[0] + self.b * s[1] + self.c * s[2] - self.d
    }
}

/// The line `{x = x, y + slope * z = intercept}` inside a switching plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneLine {
    pub x: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl PlaneLine {
    pub fn y_at(&self, z: f64) -> f64 {
        self.intercept - self.slope * z
    }

    pub fn point(&self, z: f64) -> State {
        State::new(self.x, self.y_at(z), z)
    }

    /// Euclidean distance from `(y, z)` to the line within its plane.
    pub fn distance(&self, y: f64, z: f64) -> f64 {
        (y + self.slope * z - self.intercept).abs() / (1.0 + self.slope * self.slope).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowManifolds {
    pub lambda_a: f64,
    pub lambda_r: f64,
    /// Attracting slow manifold, valid for `x <= -delta`.
    pub attracting: Plane,
    /// Repelling slow manifold, valid for `x >= delta`.
    pub repelling: Plane,
    pub line_a: PlaneLine,
    pub line_r: PlaneLine,
    /// Common y-intercept of both lines (at `z = 0`).
    pub y_star: f64,
    /// z-intercepts (at `y = 0`) of the attracting and repelling lines.
    pub z_star_a: f64,
    pub z_star_r: f64,
}

/// Fast eigenvalue of the left zone, `-(1 + sqrt(1 - 4 eps p1)) / 2`.
pub fn lambda_a(params: &Params) -> Result<f64> {
    let disc = 1.0 - 4.0 * params.eps * params.p1;
    if disc <= 0.0 {
        return Err(Error::ComplexFastEigenvalues { discriminant: disc });
    }
    Ok(-(1.0 + disc.sqrt()) / 2.0)
}

/// Exact slow manifolds of the outer zones and their traces on `x = -+delta`.
pub fn slow_manifolds(params: &Params) -> Result<SlowManifolds> {
    params.validate()?;
    let la = lambda_a(params)?;
    let lr = -la;
    let Params { p2, p3, eps, delta, .. } = *params;
    let plane = |l: f64| Plane {
        a: -l * l,
        b: l,
        c: eps * p2,
        d: -delta * l - p2 * p3 * eps * eps / l,
    };
    let line_a = PlaneLine {
        x: -delta,
        slope: eps * p2 / la,
        intercept: -delta * (1.0 + la) - p2 * p3 * eps * eps / (la * la),
    };
    let line_r = PlaneLine {
        x: delta,
        slope: eps * p2 / lr,
        intercept: -delta * (1.0 - lr) - p2 * p3 * eps * eps / (lr * lr),
    };
    let z_star = |l: &PlaneLine| if l.slope != 0.0 { l.intercept / l.slope } else { f64::NAN };
    Ok(SlowManifolds {
        lambda_a: la,
        lambda_r: lr,
        attracting: plane(la),
        repelling: plane(lr),
        y_star: line_a.intercept,
        z_star_a: z_star(&line_a),
        z_star_r: z_star(&line_r),
        line_a,
        line_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SingularityClass {
    FoldedSaddle,
    FoldedNode,
    FoldedFocus,
    #[serde(rename = "FSN-I")]
    FsnI,
    #[serde(rename = "FSN-II")]
    FsnII,
    NonRotating,
}

impl SingularityClass {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FoldedSaddle => "FoldedSaddle",
            Self::FoldedNode => "FoldedNode",
            Self::FoldedFocus => "FoldedFocus",
            Self::FsnI => "FSN-I",
            Self::FsnII => "FSN-II",
            Self::NonRotating => "NonRotating",
        }
    }
}

impl std::fmt::Display for SingularityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: SingularityClass,
    /// For `NonRotating`, the class the signs of `p2 p3` alone would give.
    pub sign_class: Option<SingularityClass>,
    pub mu: Option<f64>,
    /// `mu` is an exact integer: the top secondary canard is only a candidate.
    pub mu_integer: bool,
}

fn sign_class(p2: f64, p3: f64) -> SingularityClass {
    let q = p2 * p3;
    if p3 == 0.0 {
        SingularityClass::FsnII
    } else if p2 == 0.0 {
        SingularityClass::FsnI
    } else if q > 0.0 {
        SingularityClass::FoldedSaddle
    } else {
        SingularityClass::FoldedNode
    }
}

/// Folded-singularity type from the signs of `(p1, p2, p3)` and the `mu` threshold.
///
/// The node/focus boundary `p2 p3 = -p1 sqrt(p1)` (`mu = 1`) is reported as a
/// folded node with `mu_integer` set.
pub fn classify(p1: f64, p2: f64, p3: f64) -> Result<Classification> {
    if ![p1, p2, p3].iter().all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("non-finite coefficients ({p1}, {p2}, {p3})")));
    }
    if p2 == 0.0 && p3 == 0.0 {
        return Err(Error::Degenerate("p2 = p3 = 0: no folded singularity".into()));
    }
    let mu = max_winding(p1, p2, p3).ok();
    let mu_integer = mu.is_some_and(|m| m.fract() == 0.0);
    if p1 <= 0.0 {
        return Ok(Classification {
            class: SingularityClass::NonRotating,
            sign_class: Some(sign_class(p2, p3)),
            mu: None,
            mu_integer: false,
        });
    }
    let q = p2 * p3;
    let class = match sign_class(p2, p3) {
        SingularityClass::FoldedNode if q < -p1 * p1.sqrt() => SingularityClass::FoldedFocus,
        c => c,
    };
    Ok(Classification { class, sign_class: None, mu, mu_integer })
}

/// Maximal winding number `mu = p1 sqrt(p1) / |p2 p3|` (with `delta = pi sqrt(eps)`).
pub fn max_winding(p1: f64, p2: f64, p3: f64) -> Result<f64> {
    if p1 <= 0.0 {
        return Err(Error::NoRotation { p1 });
    }
    let q = (p2 * p3).abs();
    if q == 0.0 {
        return Err(Error::Degenerate("p2 p3 = 0: winding bound is unbounded (FSN)".into()));
    }
    Ok(p1 * p1.sqrt() / q)
}

/// Winding bound for an arbitrary central half-width: `omega t* / (2 pi)`.
pub fn winding_bound(params: &Params) -> Result<f64> {
    Ok(params.omega() * t_star(params)? / (2.0 * std::f64::consts::PI))
}

/// The rotation axis `x = -(p2/p1) z`, `y = eps p2 p3 / p1`, clipped to `|x| <= delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAxis {
    pub x_per_z: f64,
    pub y: f64,
    /// z-range of the clipped segment (`z_lo <= z_hi`); unbounded when `p2 = 0`.
    pub z_lo: f64,
    pub z_hi: f64,
}

impl RotationAxis {
    pub fn point(&self, z: f64) -> State {
        State::new(self.x_per_z * z, self.y, z)
    }

    /// Point of the axis on the plane `x = x`.
    pub fn point_at_x(&self, x: f64) -> Option<State> {
        (self.x_per_z != 0.0).then(|| self.point(x / self.x_per_z))
    }
}

pub fn rotation_axis(params: &Params) -> Result<RotationAxis> {
    let Params { p1, p2, p3, eps, delta } = *params;
    if p1 == 0.0 {
        return Err(Error::Validation("rotation axis undefined for p1 = 0".into()));
    }
    let x_per_z = -p2 / p1;
    let (z_lo, z_hi) = if x_per_z == 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let a = -delta / x_per_z;
        let b = delta / x_per_z;
        (a.min(b), a.max(b))
    };
    Ok(RotationAxis { x_per_z, y: eps * p2 * p3 / p1, z_lo, z_hi })
}

/// Time `2 p1 delta / (eps |p2 p3|)` to cross the central zone along the axis.
pub fn t_star(params: &Params) -> Result<f64> {
    let q = (params.p2 * params.p3).abs();
    if q == 0.0 {
        return Err(Error::Degenerate("p2 p3 = 0: the axis is not crossed in finite time".into()));
    }
    Ok(2.0 * params.p1.abs() * params.delta / (params.eps * q))
}
