use thiserror::Error;

/// Errors raised by builders, solvers and the hybrid integrator.
///
/// The split between [`Error::Validation`] and the numerical variants mirrors
/// the CLI exit codes: bad input exits with 2, numerical failure with 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Validation(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no rotation in the central zone (p1 = {p1})")]
    NoRotation { p1: f64 },

    #[error("complex fast eigenvalues: 1 - 4 eps p1 = {discriminant} <= 0")]
    ComplexFastEigenvalues { discriminant: f64 },

    #[error("evaluation too close to a pole of Q at z = {z} (pole at {pole})")]
    PoleProximity { z: f64, pole: f64 },

    #[error("runaway switching: more than {limit} zone switches")]
    RunawaySwitching { limit: usize },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Degenerate(_) | Error::NoRotation { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}
