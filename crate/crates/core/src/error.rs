use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-positive value {value} at index {index}; logarithm undefined")]
    NonPositive { index: usize, value: f64 },

    #[error("non-finite {what} at index {index} (t = {t})")]
    NonFinite {
        what: &'static str,
        index: usize,
        t: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expected a {expected} path, got {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("option not exercisable at index {index}: price {price} <= strike {strike}")]
    NotExercisable {
        index: usize,
        price: f64,
        strike: f64,
    },

    #[error("ensemble too small: {got} paths, need at least {need}")]
    EnsembleTooSmall { got: usize, need: usize },

    #[error("heat grid too narrow: half-width {half_width:.6} but at least {required:.6} needed")]
    GridTooNarrow { half_width: f64, required: f64 },

    #[error("unstable explicit scheme: eta*dt/dy^2 = {ratio:.6} > 1")]
    Unstable { ratio: f64 },

    #[error("test function is not periodic: phi(0) = {start}, phi(1) = {end}")]
    NotPeriodic { start: f64, end: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
