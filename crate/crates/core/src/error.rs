use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("isometry entry bound violated: max |U_ij| = {max} > K/sqrt(N) = {bound}")]
    EntryBound { max: f64, bound: f64 },

    #[error("RIP condition violated: delta_2s = {0} is not below 4/sqrt(41)")]
    RipConditionViolated(f64),

    #[error("exhaustive enumeration needs {supports} supports, budget is {budget}")]
    BudgetExceeded { supports: u128, budget: u128 },

    #[error("matrix is rank deficient (scaled sigma_min = {0:e})")]
    RankDeficient(f64),

    #[error("instance {m}x{n} is too large for the reference decoder")]
    TooLarge { m: usize, n: usize },

    #[error("operator is identically zero")]
    ZeroMatrix,

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv { .. })
    }
}
