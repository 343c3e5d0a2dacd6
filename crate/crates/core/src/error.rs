use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    #[error("caption {caption_id} (image {image_id}): length mismatch: {tokens} tokens need {expected} predictions, found {found}")]
    LengthMismatch {
        image_id: String,
        caption_id: String,
        tokens: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate caption {caption_id} for image {image_id}")]
    DuplicateCaption { image_id: String, caption_id: String },

    #[error("duplicate image {0}")]
    DuplicateImage(String),

    #[error("no scores to aggregate")]
    EmptyAggregate,

    #[error("geomean of negative value {0}")]
    NegativeGeomean(f64),

    #[error("bad metric name `{name}`: {reason}")]
    MetricName { name: String, reason: String },

    #[error("image {0} has no generated caption")]
    MissingGenerated(String),

    #[error("no embeddable tokens")]
    NoEmbeddableTokens,

    #[error("transport marginals mismatch: supplies sum to {supply}, demands sum to {demand}")]
    MarginalMismatch { supply: u64, demand: u64 },

    #[error("invalid transport problem: {0}")]
    InvalidTransport(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("non-finite value in sample for {0}; exclude that metric's rows")]
    NonFinite(String),

    #[error("cannot split {images} images into {k} strata")]
    TooManyStrata { k: usize, images: usize },

    #[error("no valid pre-gen metric to rank against {0}")]
    NothingToRank(String),

    #[error("token `{0}` is outside the model vocabulary")]
    OutOfVocabulary(String),

    #[error("image {0} not present")]
    UnknownImage(String),

    #[error("{0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
