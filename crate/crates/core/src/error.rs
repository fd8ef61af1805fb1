use thiserror::Error;

/// Everything that can go wrong while building or running a simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("cannot place {n} distinct representative ideas in a {dims}-bit space")]
    TooManyRepresentatives { n: usize, dims: u32 },

    #[error("at least 2 representative ideas are required (got {0})")]
    TooFewRepresentatives(usize),

    #[error("dimension must be in 1..={max} (got {dims})")]
    Dimension { dims: u32, max: u32 },

    #[error("idea {encoding} does not fit in {dims} bits")]
    DimensionMismatch { encoding: u64, dims: u32 },

    #[error("enumeration of {dims} bits exceeds the cap of {cap}")]
    EnumerationCap { dims: u32, cap: u32 },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("unknown group preset `{0}` (expected G0..G7)")]
    UnknownGroup(String),

    #[error("malformed log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },

    #[error("invalid event at step {step}: {reason}")]
    InvalidEvent { step: u64, reason: String },

    #[error("malformed landscape at line {line}: {reason}")]
    MalformedLandscape { line: usize, reason: String },

    #[error("insufficient data for trend test `{0}`: need at least 2 distinct parameter values")]
    InsufficientRows(String),

    #[error("{context}: {source}")]
    Task {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
