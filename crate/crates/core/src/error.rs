use thiserror::Error;

/// Errors raised across the optimisation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("point {index} is behind the camera (z = {z}, minimum {z_min})")]
    PointBehindCamera { index: usize, z: f64, z_min: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate pose corpus: rank {rank} is below the requested {requested} latent dimensions")]
    DegenerateCorpus { rank: usize, requested: usize },

    #[error("optimisation diverged at iteration {iteration}: {reason}; loss trace {trace:?}")]
    Diverged {
        iteration: usize,
        reason: String,
        trace: Vec<f64>,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported {kind} version {found} (supported major version {supported})")]
    UnsupportedVersion {
        kind: String,
        found: String,
        supported: u32,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than runtime failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Parse { .. }
                | Error::UnsupportedVersion { .. }
                | Error::Json(_)
                | Error::NonFinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
