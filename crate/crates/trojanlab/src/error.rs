//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the lab.
#[derive(Debug, Error)]
pub enum Error {
    /// Input text (or id sequence) was empty after trimming.
    #[error("input is empty")]
    EmptyInput,

    /// A token id is outside the vocabulary.
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    /// Tensor shapes in a model or gradient call do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A corpus row carried a label outside [0, num_classes).
    #[error("line {line}: label {label} out of range for {num_classes} classes")]
    LabelOutOfRange {
        line: usize,
        label: i64,
        num_classes: usize,
    },

    /// A corpus row failed to parse.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Weight file does not start with the expected magic bytes.
    #[error("bad magic bytes in weight file")]
    BadMagic,

    /// Weight file declares a format version this build does not read.
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),

    /// Weight file ended before all declared matrices were read.
    #[error("weight file truncated")]
    Truncated,

    /// Declared dimensions overflow the host address space.
    #[error("weight file dimensions overflow")]
    DimensionOverflow,

    /// Weight file has bytes past the last declared matrix.
    #[error("weight file has trailing bytes")]
    TrailingBytes,

    /// A configuration value violates its documented range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    /// Pruning removed every tunable index.
    #[error("selection mask is empty after pruning")]
    EmptyMask,

    /// A numeric quantity that must be finite was not.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Wraps a module error with the experiment stage it occurred in.
    #[error("experiment stage '{stage}': {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach experiment-stage context to an error.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
