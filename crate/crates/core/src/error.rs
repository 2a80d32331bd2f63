use thiserror::Error;

use crate::decomposer::BlockList;

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The objective produced a non-finite value. `last_x` is the last
    /// iterate at which the objective was finite.
    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, last_x: Vec<f64> },

    /// The layer budget ran out before the threshold was met. The best
    /// block list found so far is attached.
    #[error("depth limit of {max_layers} layers reached at distance {}", best.achieved_distance)]
    DepthLimit { max_layers: usize, best: Box<BlockList> },

    #[error("native synthesis failed: {0}")]
    SynthesisFailure(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Wraps an error raised while processing a nested piece of work, such
    /// as one block of a hierarchical decomposition.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SynthError>,
    },
}

impl SynthError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SynthError::InvalidArgument(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        SynthError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Walks through any `Context` wrappers and returns the innermost error.
    pub fn root(&self) -> &SynthError {
        match self {
            SynthError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
