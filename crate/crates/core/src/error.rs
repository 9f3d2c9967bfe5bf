use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate design: every column was removed by rank repair")]
    DegenerateDesign,

    #[error("Gram matrix is not positive definite at column {column} (pivot {pivot:e}, tolerance {tolerance:e})")]
    SingularGram { column: usize, pivot: f64, tolerance: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("degenerate scale: estimated total variance {0:e} is not positive")]
    DegenerateScale(f64),

    #[error("degenerate denominator: bias-corrected squared norm {0:e} is not positive")]
    DegenerateDenominator(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDesign
                | Error::SingularGram { .. }
                | Error::DegenerateVariance(_)
                | Error::DegenerateScale(_)
                | Error::DegenerateDenominator(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
