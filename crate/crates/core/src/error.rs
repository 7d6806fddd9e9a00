use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad or unreadable input: files, CSV, JSON, arguments.
    Input,
    /// Input was well formed but the computation cannot proceed on it.
    Domain,
    /// A contract between modules was broken.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: only 8-bit sources are supported (found {found})")]
    UnsupportedDepth { path: PathBuf, found: String },
    #[error("{path}: images with an alpha channel are rejected")]
    AlphaChannel { path: PathBuf },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("operation needs a 3-channel image, got {channels} channel(s)")]
    NotColorImage { channels: usize },
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("structuring element radius {radius} too large for {width}x{height} plane")]
    ElementTooLarge {
        radius: usize,
        width: usize,
        height: usize,
    },
    #[error("plane has a single intensity; no threshold separates it")]
    DegeneratePlane,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {0} appears more than once")]
    DuplicateIndex(usize),
    #[error("cannot select {k} of {n} items")]
    KTooLarge { k: usize, n: usize },
    #[error("exact selection is limited to {max} items, got {n}")]
    InstanceTooLarge { n: usize, max: usize },
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("weight {name}={value} outside [0, 1]")]
    WeightOutOfRange { name: &'static str, value: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("covariance is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("CSV error in {path}: {message}")]
    CsvParse { path: PathBuf, message: String },
    #[error("no embedding row for {0}")]
    MissingEmbedding(String),
    #[error("no usable records")]
    NoRecords,
    #[error("class {class} has {available} samples, {requested} requested")]
    ClassTooSmall {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error("seed image could not be segmented: {0}")]
    SeedSegmentationFailed(Box<Error>),
    #[error("cohort {seed_id} has {available} eligible candidates, {requested} requested")]
    CohortTooSmall {
        seed_id: String,
        available: usize,
        requested: usize,
    },
    #[error("manifest schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::CsvParse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Io { .. }
            | Decode { .. }
            | UnsupportedDepth { .. }
            | AlphaChannel { .. }
            | InvalidImage(_)
            | CsvParse { .. }
            | MissingEmbedding(_)
            | NoRecords
            | SchemaVersionMismatch { .. }
            | Json(_)
            | Config(_)
            | WeightOutOfRange { .. }
            | NonFiniteInput
            | DimensionMismatch(_)
            | IndexOutOfRange { .. }
            | DuplicateIndex(_)
            | KTooLarge { .. }
            | InstanceTooLarge { .. }
            | ClassTooSmall { .. }
            | CohortTooSmall { .. } => ErrorKind::Input,
            NotColorImage { .. }
            | EmptyHistogram
            | ElementTooLarge { .. }
            | DegeneratePlane
            | EmptyMask
            | EmptyRoi
            | TooFewSamples { .. }
            | NotPsd { .. }
            | SeedSegmentationFailed(_) => ErrorKind::Domain,
            Invariant(_) => ErrorKind::Internal,
        }
    }
}
