//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("class index {index} out of range for {len} classes")]
    ClassOutOfRange { index: usize, len: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown word {0:?} (strict embedding lookup)")]
    UnknownWord(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("operation {op} not supported for model kind {kind}")]
    WrongKind { op: &'static str, kind: String },

    #[error("model kind {0} requires a context (subject/object pair embedding)")]
    MissingContext(String),

    #[error("model kind {kind} expects a {expected} feature input")]
    FeatureVariantMismatch { kind: String, expected: &'static str },

    #[error("unknown model kind {0:?}")]
    UnknownModelKind(String),

    #[error("unknown combination class {0}")]
    UnknownCombo(String),

    #[error("negative language prior {weight} for ({subject}, {predicate}, {object})")]
    NegativePrior {
        subject: String,
        predicate: String,
        object: String,
        weight: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dataset validation failed for image {image}: {message}")]
    DatasetViolation { image: String, message: String },

    #[error("missing feature map {0:?}")]
    MissingFeatureMap(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
