use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },
    #[error("matrix rank {rank} is below the required {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("least-squares routes disagree (relative difference {rel_diff:e})")]
    RouteMismatch { rel_diff: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("negative radicand {value:e} in {context}")]
    NegativeRadicand { context: &'static str, value: f64 },
    #[error("quadrature did not converge: achieved {achieved:e}, target {target:e}")]
    Quadrature { achieved: f64, target: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Linalg(_) => "linalg",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::RouteMismatch { .. } => "route_mismatch",
            Error::Degenerate(_) => "degenerate_input",
            Error::NegativeRadicand { .. } => "negative_radicand",
            Error::Quadrature { .. } => "quadrature",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
