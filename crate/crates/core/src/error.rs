use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is rank deficient (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("enumeration too large: {what} needs {needed}, cap is {cap}")]
    TooLarge { what: &'static str, needed: u128, cap: u128 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("no dual certificate exists for the pair (S1={s1:?}, S2={s2:?})")]
    NoCertificate { s1: Vec<usize>, s2: Vec<usize> },

    #[error("bad dimension: {0}")]
    BadDim(String),

    #[error("polyhedron is empty")]
    EmptyPolyhedron,

    #[error("support function is unbounded in a sampled direction")]
    Unbounded,

    #[error("missing extras: {0}")]
    MissingExtras(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error in field `{field}`{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { field: String, line: Option<usize>, msg: String },

    #[error("could not draw a full-row-rank matrix after {0} attempts")]
    RankRetryExhausted(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Usage-type errors map to exit code 2 in the CLI, everything else to 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Config { .. } | Error::Io(_)
                | Error::BadDim(_) | Error::DimMismatch(_) | Error::MissingExtras(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
