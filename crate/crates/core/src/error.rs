use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical input violates its domain (non-finite, non-positive, or out of range).
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The steady state is not unique (kernel dimension differs from one).
    #[error("steady state is not unique: kernel dimension {kernel_dim}")]
    NonUniqueSteadyState { kernel_dim: usize },

    /// The population transfer generator has rank below two.
    #[error("degenerate steady state: second-smallest singular value {sigma} below threshold {threshold}")]
    DegenerateSteadyState { sigma: f64, threshold: f64 },

    /// Two evaluation routes of the same quantity disagree.
    #[error("internal consistency check `{check}` failed: residual {residual:e} exceeds {tolerance:e}")]
    Consistency {
        check: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("time integration produced a non-finite state at t = {time}")]
    Integration { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn check(check: &'static str, residual: f64, tolerance: f64) -> Result<()> {
        if residual <= tolerance {
            Ok(())
        } else {
            Err(Error::Consistency {
                check,
                residual,
                tolerance,
            })
        }
    }
}
