use thiserror::Error;

/// Errors raised by the segmentation engine and its file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("value {value} at pixel ({x}, {y}) is outside [0, 255]")]
    Range { x: usize, y: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("class {class} has no membership mass")]
    DegenerateClass { class: usize },

    #[error("bias denominator vanishes at pixel ({x}, {y})")]
    DegenerateBias { x: usize, y: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("regularization step {dt2} violates the stability bound 0 <= dt2 <= 0.25")]
    StabilityViolation { dt2: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
