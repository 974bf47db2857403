use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("empty coalition: a bag must keep at least one instance")]
    EmptyCoalition,

    #[error("method not applicable: {0}")]
    MethodInapplicable(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sample budget {n} is too small for a bag of {k} instances (need at least {min})")]
    Budget { n: usize, k: usize, min: usize },

    #[error("degenerate coalition sample: {0}")]
    DegenerateSample(String),

    #[error("metric unavailable: {0}")]
    MetricUnavailable(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("model has no inherent interpretability method: {0}")]
    NoInherentMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parameter(_) | Error::Parse { .. } | Error::Schema(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
