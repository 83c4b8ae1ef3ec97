use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid reconstruction: {0}")]
    Validation(String),

    #[error("unknown point id {0}")]
    UnknownPoint(u64),

    #[error("neuron id mismatch: {0} vs {1}")]
    NeuronMismatch(u64, u64),

    #[error("empty reconstruction")]
    EmptyReconstruction,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("volume: {0}")]
    Volume(String),

    #[error("dataset format: {0}")]
    Format(String),

    #[error("checksum mismatch in record {record}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        record: u64,
        stored: u32,
        computed: u32,
    },

    #[error("{0}")]
    Metrics(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("tiff: {0}")]
    Tiff(#[from] tiff::TiffError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
