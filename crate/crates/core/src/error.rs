use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero denominator")]
    ZeroDenominator,

    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("realization requires square expression")]
    NonSquare,

    #[error("singular subexpression")]
    SingularSubexpression,

    #[error("nonlinear block at ({0}, {1})")]
    NonlinearBlock(usize, usize),

    #[error("non-Gaussian-affine random block at ({0}, {1})")]
    NonGaussianBlock(usize, usize),

    #[error("empty selection")]
    EmptySelection,

    #[error("singular pencil")]
    SingularPencil,

    #[error("singular difference")]
    SingularDifference,

    #[error("index ({0}, {1}) out of range for a {2}-block pencil")]
    IndexOutOfRange(usize, usize, usize),

    #[error("missing variance for random matrix {0}")]
    MissingVariance(String),

    #[error("unbound value for {0}")]
    Unbound(String),

    #[error("trace evaluation pole in {0}")]
    TracePole(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, detail: impl Into<String>) -> Error {
        Error::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub fn parse(line: usize, col: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Error {
        Error::parse(e.line(), e.column(), e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
