//! Scenario = JSON config overlaid with command-line flags.
//!
//! Every flag `--some-knob` is also accepted as the config key `"some-knob"`;
//! a flag given on the command line wins over the file.

use std::fs;
use std::path::PathBuf;

use canard_core::model::{build_global_return, build_minimal_3d, build_planar, PlanarShape, PlanarSystem};
use canard_core::{Params, ReturnParams, State, SystemSpec};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Three-zone minimal system.
    Minimal,
    /// Four zones with the affine return term in z'.
    GlobalReturn,
    /// Planar Liénard system (drifted when `drift` is set).
    Planar,
    /// Smooth comparison system with f(x) = x^2.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    QuasiCanard,
    Arima,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Knobs {
    /// Subcommand the config file is written for (config files only).
    #[arg(skip)]
    pub command: Option<String>,

    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub p3: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Central half-width; default pi sqrt(eps).
    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long)]
    pub alpha3: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// Left boundary of the fourth zone.
    #[arg(long)]
    pub x0: Option<f64>,

    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    /// Initial state.
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub y: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Dense-output step of trajectory CSVs.
    #[arg(long)]
    pub sample_step: Option<f64>,

    /// Canard index.
    #[arg(long)]
    pub k: Option<u64>,

    #[arg(long, value_enum)]
    pub shape: Option<ShapeKind>,
    /// Middle slope magnitude of the quasi-canard shape.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub arima_delta: Option<f64>,
    #[arg(long)]
    pub arima_x0: Option<f64>,
    /// Planar equilibrium parameter.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub a_min: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Number of grid points (scans, sweeps).
    #[arg(long)]
    pub n: Option<usize>,
    /// Slow drift a' = eps c.
    #[arg(long)]
    pub drift: Option<f64>,
    /// SAO/LAO amplitude threshold.
    #[arg(long)]
    pub threshold: Option<f64>,

    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// Open the singular portrait into a strip of half-width `half-width`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub opened: Option<bool>,
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Field samples per axis of the singular portrait.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub z_min: Option<f64>,
    #[arg(long)]
    pub z_max: Option<f64>,
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Overlay the non-empty flags onto the config file (if any).
pub fn merge(config: Option<&PathBuf>, flags: &Knobs, command: &str) -> Result<Knobs, CliError> {
    let mut base = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))? {
                Value::Object(m) => m,
                _ => return Err(config_err(format!("{}: expected one JSON object", path.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(m) = serde_json::to_value(flags).map_err(config_err)? {
        base.extend(m.into_iter().filter(|(_, v)| !v.is_null()));
    }
    let knobs: Knobs = serde_json::from_value(Value::Object(base)).map_err(config_err)?;
    if let Some(c) = &knobs.command {
        if c != command {
            return Err(config_err(format!("config is for `{c}`, not `{command}`")));
        }
    }
    Ok(knobs)
}

impl Knobs {
    pub fn params(&self, default_eps: f64) -> Result<Params, CliError> {
        let mut p = Params::new(
            self.p1.unwrap_or(1.0),
            self.p2.unwrap_or(-1.0),
            self.p3.unwrap_or(0.2),
            self.eps.unwrap_or(default_eps),
        );
        if let Some(d) = self.delta {
            p = p.with_delta(d);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn has_return(&self) -> bool {
        [self.alpha1, self.alpha2, self.alpha3, self.kappa, self.zeta, self.xi, self.x0].iter().any(Option::is_some)
    }

    /// `base` with every return knob that is set replaced.
    pub fn ret(&self, base: ReturnParams) -> ReturnParams {
        ReturnParams {
            alpha1: self.alpha1.unwrap_or(base.alpha1),
            alpha2: self.alpha2.unwrap_or(base.alpha2),
            alpha3: self.alpha3.unwrap_or(base.alpha3),
            kappa: self.kappa.unwrap_or(base.kappa),
            zeta: self.zeta.unwrap_or(base.zeta),
            xi: self.xi.unwrap_or(base.xi),
            x0: self.x0.unwrap_or(base.x0),
        }
    }

    pub fn state(&self, default: State) -> State {
        State::new(self.x.unwrap_or(default[0]), self.y.unwrap_or(default[1]), self.z.unwrap_or(default[2]))
    }

    /// Family requested, or implied by the knobs that are set.
    pub fn family(&self) -> FamilyKind {
        self.family.unwrap_or(if self.shape.is_some() || self.a.is_some() {
            FamilyKind::Planar
        } else if self.has_return() {
            FamilyKind::GlobalReturn
        } else {
            FamilyKind::Minimal
        })
    }

    pub fn shape(&self) -> PlanarShape {
        match self.shape.unwrap_or(ShapeKind::QuasiCanard) {
            ShapeKind::QuasiCanard => PlanarShape::QuasiCanard { k: self.slope.unwrap_or(0.5) },
            ShapeKind::Arima => {
                let PlanarShape::Arima { beta, delta, x0 } = PlanarShape::arima_default() else { unreachable!() };
                PlanarShape::Arima {
                    beta: self.beta.unwrap_or(beta),
                    delta: self.arima_delta.unwrap_or(delta),
                    x0: self.arima_x0.unwrap_or(x0),
                }
            }
        }
    }

    /// Planar system; `a` defaults to a value inside the canard regime of the shape.
    pub fn planar(&self) -> Result<PlanarSystem, CliError> {
        let shape = self.shape();
        let a = self.a.unwrap_or(match shape {
            PlanarShape::QuasiCanard { .. } => 0.97,
            PlanarShape::Arima { .. } => -0.02,
        });
        let mut system = PlanarSystem::new(shape, a, self.eps.unwrap_or(0.1));
        if let Some(c) = self.drift {
            system = system.drifted(c);
        }
        build_planar(system)?;
        Ok(system)
    }

    /// Piecewise-linear system for `simulate` / `sweep`.
    pub fn spec(&self) -> Result<SystemSpec, CliError> {
        Ok(match self.family() {
            FamilyKind::Minimal => build_minimal_3d(self.params(0.01)?)?,
            FamilyKind::GlobalReturn => {
                let zero = ReturnParams { alpha1: 0.0, alpha2: 0.0, alpha3: 0.0, kappa: 0.0, zeta: 0.0, xi: 0.0, x0: 1.0 };
                build_global_return(self.params(0.01)?, self.ret(zero))?
            }
            FamilyKind::Planar => build_planar(self.planar()?)?,
            FamilyKind::Smooth => return Err(CliError::Config("the smooth system has no zone structure".into())),
        })
    }

    pub fn positive(&self, name: &str, v: f64) -> Result<f64, CliError> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
        }
    }
}
