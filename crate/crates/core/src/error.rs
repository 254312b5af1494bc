use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A type invariant was violated while constructing a value.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    /// The requested cell size leaves a segment (or dimension) without cells.
    #[error("discretization error: {0}")]
    Discretization(String),
    /// Field evaluation point lies on top of a dipole cell.
    #[error("singular field evaluation: point within {distance:.3e} m of cell {cell}")]
    Singular { cell: usize, distance: f64 },
    /// Time step exceeds the stability bound of the configured dynamics.
    #[error("time step {dt:.3e} s exceeds stability limit {limit:.3e} s")]
    Stability { dt: f64, limit: f64 },
    /// The integrated state became non-finite.
    #[error("integration produced a non-finite state at t = {t:.6} s")]
    Integration { t: f64 },
    /// Capsule left the surface extent.
    #[error("position ({x:.4}, {y:.4}) m is outside the surface extent")]
    OutOfBounds { x: f64, y: f64 },
    /// Protrusion cannot be climbed by a body of this rolling radius.
    #[error("protrusion of height {height:.4e} m is untraversable for radius {radius:.4e} m")]
    Untraversable { height: f64, radius: f64 },
    /// Degenerate input (collinear fiducials, zero-length track, coincident markers, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A marker projects outside the camera frame.
    #[error("marker at pixel ({u:.1}, {v:.1}) is outside the camera frame")]
    Visibility { u: f64, v: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}

pub(crate) fn domain(reason: impl Into<String>) -> Error {
    Error::Domain(reason.into())
}
