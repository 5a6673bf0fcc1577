use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("generation error: {0}")]
    Generation(String),

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("empty input sequence")]
    EmptySequence,

    #[error("non-finite loss at epoch {epoch}, batch {batch} (parameter L2 norm {param_norm})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("gold set is empty")]
    EmptyGoldSet,

    #[error("degenerate discretization thresholds: {0}")]
    DegenerateThresholds(String),

    #[error("cannot induce rules from zero instances")]
    NoInstances,

    #[error("induced rule covers no residual instance")]
    RuleCoversNothing,

    #[error("split leakage: {0}")]
    SplitLeakage(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
