use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside the operation's contract.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("requested an empty fading path")]
    EmptyPath,

    #[error("lag {lag} is outside the tabulated range 0..={max_lag}")]
    LagOutOfRange { lag: i64, max_lag: usize },

    #[error("autocorrelation is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("normal equations are numerically rank deficient: {0}")]
    NumericalRank(String),

    #[error("log-MGF argument mu = {0} is positive; the moment generating function may diverge")]
    PositiveMu(f64),

    /// An analytic identity (convexity, ordering) failed numerically.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error(
        "PSC {psc} needs a codebook of ~e^{log_size:.1} codewords, above the exhaustive cap of {cap}; \
         reduce the block length or the rate fraction, or use the ensemble decoder"
    )]
    CodebookTooLarge {
        psc: usize,
        log_size: f64,
        cap: usize,
    },

    #[error("autocorrelation table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
