use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants split into two families: input validation (malformed
/// descriptors, grids, configurations) and computational limits (budget caps,
/// non-finite integrands, missing brackets). The CLI maps the former to exit
/// code 1 and the latter to exit code 2; see [`Error::is_computational`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Young function: {0}")]
    InvalidYoung(String),

    #[error("no bracket: value {y} exceeds the supremum {sup} of the function")]
    NoBracket { y: f64, sup: f64 },

    #[error("integrand is not finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("classifier label {numeric} disagrees with the analytic verdict {analytic}")]
    AnalyticDisagreement { numeric: String, analytic: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid rectangle: {0}")]
    InvalidRect(String),

    #[error("empty rectangle")]
    EmptyRect,

    #[error("grid geometries do not match")]
    GeometryMismatch,

    #[error("operation budget exceeded: {needed} elementary operations requested, cap is {cap}")]
    BudgetExceeded { needed: u64, cap: u64 },

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("degenerate set: w(E) = 0")]
    DegenerateSet,

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures caused by numeric or resource limits rather than bad input.
    pub fn is_computational(&self) -> bool {
        matches!(
            self,
            Error::NoBracket { .. }
                | Error::NonFinite { .. }
                | Error::AnalyticDisagreement { .. }
                | Error::BudgetExceeded { .. }
                | Error::DegenerateSet
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
