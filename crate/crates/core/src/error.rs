use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmrfError {
    #[error("site ({row}, {col}) is outside the {height}x{width} lattice")]
    IndexError {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("|beta| = {beta} is outside the stable range |beta| < 1/{delta}; pass the unstable override to run anyway")]
    UnstableBeta { beta: f64, delta: usize },

    #[error("simulation diverged at sweep {sweep}: non-finite value produced")]
    DivergedSimulation { sweep: usize },

    #[error("covariance matrix is not positive definite")]
    SingularCovariance,

    #[error("degenerate field: sample variance is zero")]
    DegenerateField,

    #[error("degenerate neighbourhood: pseudo-likelihood denominator is zero")]
    DegenerateNeighborhood,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GmrfError {
    fn from(e: std::io::Error) -> Self {
        GmrfError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GmrfError>;
