//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value produced in layer {layer} during {what}")]
    NonFinite { layer: usize, what: &'static str },

    #[error("{what} = {value} outside valid range {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("class {class} has no examples in the dataset")]
    EmptyClass { class: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad IDX magic: expected 0x{expected:08x}, got 0x{actual:08x}")]
    IdxMagic {
        path: PathBuf,
        expected: u32,
        actual: u32,
    },

    #[error("{path}: truncated: expected {expected} bytes, got {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("round {round}, device {device}: {source}")]
    InTraining {
        round: usize,
        device: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches federated-round context to an error bubbling out of local
    /// training.
    pub fn in_training(self, round: usize, device: usize) -> Self {
        Error::InTraining {
            round,
            device,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
