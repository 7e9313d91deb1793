use thiserror::Error;

/// Errors raised across the protection engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid device parameters: {0}")]
    InvalidDevice(String),

    #[error("model invariant violated: {0}")]
    ModelInvariant(String),

    #[error("node {0} has no path to the ground reference")]
    DanglingNode(String),

    #[error("duplicate binding: {0}")]
    DuplicateBinding(String),

    #[error("unknown reference: {0}")]
    UnknownReference(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular companion matrix at step {step} (t = {time_s} s)")]
    SingularCompanion { step: usize, time_s: f64 },

    #[error("unobservable measurement configuration: {m} enabled rows for {n} states ({detail})")]
    Unobservable { m: usize, n: usize, detail: String },

    #[error("no measurement redundancy (degrees of freedom = 0)")]
    NoRedundancy,

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
