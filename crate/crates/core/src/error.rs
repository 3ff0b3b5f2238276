use thiserror::Error;

/// Errors raised by the simulation modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Grids, quadratures or tolerances cannot support the request.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an API contract (mismatched endpoints, odd pulse, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An approximation was requested outside the regime where it is claimed.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The adaptive integrator could not reach the requested tolerance.
    #[error("integration failed near r = {at}: {reason} (worst local error estimate {worst_error:.3e})")]
    Integration { at: f64, reason: String, worst_error: f64 },

    /// |a|^2 - |b|^2 drifted away from one even after tightening.
    #[error("energy conservation violated: residual {residual:.3e} exceeds {limit:.1e}")]
    Conservation { residual: f64, limit: f64 },

    /// The surface multiple-reflection denominator 1 - Gamma R vanishes.
    #[error("near resonance at omega = {omega}: |1 - Gamma R| = {denominator:.3e}")]
    NearResonance { omega: f64, denominator: f64 },

    /// An algebraic identity that must hold did not.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
