use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not antisymmetric (symmetric part {0:.3e})")]
    NotAntisymmetric(f64),
    #[error("rotation update is singular (|h*omega| = {0:e})")]
    SingularUpdate(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("sigma must be positive (got {0})")]
    InvalidSigma(f64),
    #[error("operation requires positive friction c")]
    ZeroFriction,
    #[error("operation requires positive noise amplitude alpha")]
    ZeroNoise,
    #[error("need at least {needed} trajectories per group, got {got}")]
    TooFewTrajectories { needed: usize, got: usize },
    #[error("series is not positive on the fit window (value {0:e} at index {1})")]
    NonPositiveSeries(f64, usize),
    #[error("increment variance is degenerate")]
    DegenerateVariance,
    #[error("field point within {0:e} m of a dipole")]
    SingularFieldPoint(f64),
    #[error("trajectory carries no noise record")]
    MissingNoiseRecord,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown figure `{0}`")]
    UnknownFigure(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
