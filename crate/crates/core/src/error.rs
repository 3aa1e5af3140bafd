use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: coincident points")]
    DegenerateGeometry,

    #[error("more clusters than users: {clusters} clusters for {users} users")]
    MoreClustersThanUsers { users: usize, clusters: usize },

    #[error("{users} users cannot be split equally across {clusters} UAVs")]
    IndivisibleUsers { users: usize, clusters: usize },

    #[error("empty RF support: no quantized angle pair falls inside the angle window")]
    EmptyRfSupport,

    #[error("rank-deficient ZF: regularized system is singular")]
    RankDeficientZf,

    #[error("degenerate power allocation: all entries are zero for {transmitter}")]
    DegeneratePowerAllocation { transmitter: String },

    #[error("non-finite rate in {context} (condition estimate {condition:e})")]
    NumericalBlowup { context: &'static str, condition: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
