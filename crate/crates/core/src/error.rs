use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dirichlet fit did not converge: {0}")]
    NonConvergence(String),

    #[error("window of {len} samples is too small (need at least {needed})")]
    WindowTooSmall { len: usize, needed: usize },

    #[error("malformed route: {0}")]
    MalformedRoute(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
