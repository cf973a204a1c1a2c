use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error in <{element}>: {message}")]
    Schema { element: String, message: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("alignment failed: best inlier fraction {inlier_fraction:.4} below {required:.2}")]
    AlignmentFailure { inlier_fraction: f64, required: f64 },

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("registration of scan {from} onto scan {to} failed: {source}")]
    Registration {
        from: usize,
        to: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("pose estimation failed for {class} #{instance}: {source}")]
    Pose {
        class: String,
        instance: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Parse { .. } | Error::Schema { .. }
        )
    }
}
