//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("record `{id}` has no feature `{feature}`")]
    MissingFeature { id: String, feature: String },

    #[error("ratio weight for record `{id}`: denominator `{feature}` is zero")]
    ZeroDenominator { id: String, feature: String },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("master sample is empty")]
    EmptyMaster,

    #[error("sample was produced from a different master (checksum mismatch)")]
    MasterMismatch,

    #[error("sample already exhausted the master; nothing left to adjoin")]
    AlreadyExhausted,

    #[error("sample has no entries")]
    EmptySample,

    #[error("malformed curve: {0}")]
    MalformedCurve(String),

    #[error("correlation matrix is not positive definite after rank-to-Gaussian conversion")]
    NotPositiveSemidefinite,

    #[error("not enough usable nodes: {0}")]
    InsufficientNodes(String),

    #[error("master references id `{0}` absent from the record set")]
    UnknownId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("master data does not match its recorded checksum")]
    ChecksumMismatch,

    #[error("invalid master file: {0}")]
    InvalidMaster(String),

    #[error("cannot parse predicate `{text}`: {msg}")]
    PredicateParse { text: String, msg: String },

    #[error("cannot parse weight spec `{text}`: {msg}")]
    WeightSpecParse { text: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("{path}: {msg}")]
    File { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
