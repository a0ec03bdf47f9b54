use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max |H - H†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{name} = {value} is outside its domain ({domain})")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no sign change in bracket [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error(
        "time step {dt:e} s exceeds 1/(50 f_max) = {limit:e} s; binding frequency scale is {scale} ({frequency_hz:e} Hz)"
    )]
    StepTooLarge {
        dt: f64,
        limit: f64,
        scale: &'static str,
        frequency_hz: f64,
    },

    #[error("sine fit is rank deficient: {0}")]
    RankDeficientFit(String),

    #[error("kernel is multi-modal; candidate peaks at t = {candidates:?}")]
    AmbiguousPeak { candidates: Vec<f64> },

    #[error("serialization: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
            other => Error::Format(format!("{other:?}")),
        }
    }
}

pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        domain,
    }
}
