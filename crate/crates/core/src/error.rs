use thiserror::Error;

/// Errors raised by the geometry, discretization and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid annulus radii: inner {inner}, outer {outer}")]
    InvalidAnnulus { inner: f64, outer: f64 },

    #[error("invalid target: rstar must exceed 1 (got {rstar}), delta must lie in [0, 1) (got {delta})")]
    InvalidTarget { rstar: f64, delta: f64 },

    #[error("degenerate modulus: tau must be positive and finite (got {0})")]
    DegenerateModulus(f64),

    #[error("grid too small: need n_s >= 4 and even n_theta >= 8 (got {n_s} x {n_theta})")]
    GridTooSmall { n_s: usize, n_theta: usize },

    #[error("field shape {got:?} does not match grid shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("degree undefined: field passes within {distance:e} of the base point at row {row}, column {col}")]
    DegreeUndefined { row: usize, col: usize, distance: f64 },

    #[error("region mask touches boundary row {0}")]
    MaskTouchesBoundary(usize),

    #[error("linear solver stopped after {iterations} iterations with residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("resolution too coarse: modulus estimates {fine} and {coarse} differ by more than 1%")]
    ResolutionTooCoarse { fine: f64, coarse: f64 },

    #[error("NaN encountered in line search at iteration {iteration}")]
    NanInLineSearch { iteration: usize },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
