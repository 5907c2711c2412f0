use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid time {0}: must be finite and nonnegative")]
    InvalidTime(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("score undefined at state {state}: forward marginal has zero mass there")]
    UndefinedScore { state: usize },

    #[error("data distribution lacks full support (state {state} has zero mass)")]
    NoFullSupport { state: usize },

    #[error("time {0} is not a grid time of the sampler")]
    NotAGridTime(f64),

    #[error("tabular estimator has no entry for grid index {k}, state {state}")]
    MissingEstimate { k: usize, state: usize },

    #[error(
        "uniformization violated at step {step}: stay probability {residual} < 0 \
         (lambda_k = {lambda} too small)"
    )]
    UniformizationViolation {
        step: usize,
        lambda: f64,
        residual: f64,
    },

    #[error(
        "score undefined on the first interval: delta = 0 requires full-support data \
         (bounded data score assumption); state {state} has zero mass"
    )]
    EarlyStopRequired { state: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Tags an error with the module it surfaced from.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ Error::Module { .. } => e,
            e => Error::Module {
                module,
                source: Box::new(e),
            },
        }
    }
}
