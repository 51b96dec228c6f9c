use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    Network(String),

    #[error("path `{path}` is not a directed walk from `{origin}` to `{destination}`: {reason}")]
    MalformedPath {
        path: String,
        origin: String,
        destination: String,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("configuration error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("invalid delay schedule: {0}")]
    Schedule(String),

    #[error("round {tau} is not delivered at round {t}")]
    NotInBundle { t: usize, tau: usize },

    #[error("pigeonhole bound violated at t={t}, tau={tau}: {detail}")]
    Pigeonhole { t: usize, tau: usize, detail: String },

    #[error("entropic mirror map needs a strictly positive interior point (entry {index} is {value})")]
    NotInterior { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("grid search supports at most {max} paths, network has {actual}")]
    GridTooLarge { max: usize, actual: usize },

    #[error("weight condition `{condition}` violated at index {index}")]
    WeightCondition { condition: &'static str, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all observed gaps are zero; add noise or use a shorter horizon")]
    DegenerateGaps,

    #[error("unknown {family} `{name}` (known: {known})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        known: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
