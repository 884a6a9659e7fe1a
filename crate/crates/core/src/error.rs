use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("duplicate image ({sequence_id}, {image_id}) at row {row}")]
    DuplicateImage {
        row: usize,
        sequence_id: String,
        image_id: String,
    },
    #[error("row {row}: empty label co-set with an animal label")]
    EmptyConflict { row: usize },
    #[error("row {row}: label width {found}, expected {expected}")]
    InconsistentWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
    #[error("invalid feature file: {0}")]
    FeatureFormat(String),
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite gradient at optimizer step {step}")]
    NonFiniteGradient { step: usize },
    #[error("tta flip requested without a flipped feature store")]
    MissingFlippedFeatures,
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("vocabulary mismatch between tables")]
    VocabularyMismatch,
    #[error("no prediction tables to combine")]
    EmptyTableList,
    #[error("{weights} weights for {tables} tables")]
    WeightMismatch { weights: usize, tables: usize },
    #[error("weights must be non-negative and sum to 1: {0}")]
    BadWeights(String),
}

/// Coarse failure class, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            Error::NonFiniteGradient { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Io => 4,
        }
    }
}
