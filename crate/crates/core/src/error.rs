use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |m[i][j] - conj(m[j][i])| = {max_asymmetry:.3e}")]
    NotHermitian { max_asymmetry: f64 },

    #[error("matrix logarithm needs a positive-definite input, found eigenvalue {eigenvalue:.3e}")]
    NonPositiveEigenvalue { eigenvalue: f64 },

    #[error("unsupported matrix dimension {0} (expected 2, 4 or 8)")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("keep-set must be a nonempty proper subset of the three qubits")]
    InvalidKeepSet,

    #[error("mixing probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("expected a pure state, purity is {purity:.12}")]
    MixedInput { purity: f64 },

    #[error("invalid bath parameter: {0}")]
    InvalidBath(String),

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("quadrature did not converge: estimate {estimate:.6e}, error bound {error_bound:.3e}")]
    Quadrature { estimate: f64, error_bound: f64 },

    #[error("integration step too large (trace drift {drift:.3e}); use a smaller dt")]
    StepTooLarge { drift: f64 },

    #[error("support of rho is not contained in support of sigma (weight {weight:.3e} outside)")]
    SupportViolation { weight: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("nothing to render: {0}")]
    EmptySelection(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
