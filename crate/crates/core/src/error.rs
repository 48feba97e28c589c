use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} outside the domain [-1, 0]")]
    Domain { value: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("operation requires a scalar measure, got dimension {0}")]
    UnsupportedDimension(usize),

    #[error("I - A is singular (|det| = {det:e}); the equation is not well posed")]
    NotWellPosed { det: f64 },

    #[error("initial condition cannot be projected onto C0 (residual {residual:e})")]
    NotProjectable { residual: f64 },

    #[error("initial condition is not compatible with the equation (residual {residual:e} > {tolerance:e})")]
    NotInC0 { residual: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("torus dimension {0} exceeds 6; use the scalar criterion or a Monte-Carlo search")]
    Dimensionality(usize),

    #[error("resource guard: {0}")]
    ResourceLimit(String),

    #[error("root count could not be certified: {0}")]
    Uncountable(String),

    #[error("root certification mismatch: found {found} roots, argument principle counts {counted}")]
    CountMismatch { found: usize, counted: i64 },

    #[error("total variation {tv} < 1: no destabilizing perturbation exists")]
    NoDestabilizer { tv: f64 },

    #[error("eigenvalue computation did not converge")]
    Eigen,

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
