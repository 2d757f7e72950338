use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),

    #[error("cannot parse `{value}` as a number at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("dataset has no feature columns")]
    NoColumns,

    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),

    #[error("split of {n} rows with train fraction {fraction} leaves one side empty")]
    DegenerateSplit { n: usize, fraction: f64 },

    #[error("entropy of an empty histogram is undefined")]
    EmptyHistogram,

    #[error("split on feature {feature} at {threshold} leaves one side empty")]
    EmptySide { feature: usize, threshold: f64 },

    #[error("no training rows")]
    EmptyInput,

    #[error("row has {found} features, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("model index must be 1 or 2, got {0}")]
    InvalidModel(usize),

    #[error("training inputs do not match the tree (fingerprint {found}, tree was built from {expected})")]
    StaleInputs { expected: String, found: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
