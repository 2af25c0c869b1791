use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` must be finite and strictly positive (got {value})")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("Holling denominator {which} = {value:e} vanishes")]
    SingularDenominator { which: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("change of variables is singular (det = {det:e})")]
    SingularTransform { det: f64 },

    #[error("time-to-angle reparametrization invalid: |dθ/dt| = {0:e}")]
    Reparametrization(f64),

    #[error("series extraction ill-conditioned: {0}")]
    IllConditioned(String),

    #[error(
        "quadrature did not converge after {doublings} doublings (last change {change:e}, tolerance {tolerance:e})"
    )]
    Quadrature { doublings: usize, change: f64, tolerance: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("trajectory left the bounding box at t = {t}")]
    NoReturn { t: f64 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("trivial Floquet multiplier missing: closest multiplier is at distance {distance:e} from 1")]
    TrivialMultiplier { distance: f64 },

    #[error("degenerate Jacobian (|det| = {det:e}); the zero is not certified")]
    DegenerateJacobian { det: f64 },
}

impl Error {
    /// True for failures of an iterative or numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularTransform { .. }
                | Error::Reparametrization(_)
                | Error::IllConditioned(_)
                | Error::Quadrature { .. }
                | Error::Integration(_)
                | Error::NoReturn { .. }
                | Error::NonConvergence(_)
                | Error::TrivialMultiplier { .. }
                | Error::DegenerateJacobian { .. }
                | Error::SingularDenominator { .. }
                | Error::Domain(_)
        )
    }
}
