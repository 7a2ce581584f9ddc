use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    UnparsableCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("file contains no data rows")]
    EmptyFile,

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("unknown class label {0:?} (not seen in training data)")]
    UnknownLabel(String),

    #[error("class {class} has {count} instance(s); at least {required} required")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("cannot form {k} folds from {n} instances")]
    InvalidFoldCount { n: usize, k: usize },

    #[error("fold {fold}: training part has no instance of class {class}")]
    MissingClassInFold { fold: usize, class: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("no instances to evaluate")]
    EmptyInput,

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("class counts are all zero")]
    EmptyCounts,

    #[error("candidate feature set is empty")]
    NoCandidateFeatures,

    #[error("window {window} does not fit in extent {extent}")]
    WindowTooLarge { window: usize, extent: usize },

    #[error("2-D window requested but the data has no panel shape")]
    MissingPanelShape,

    #[error("raw dimension {0} is too small for default windows; give windows explicitly")]
    DimensionTooSmallForDefaultWindows(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model file format version {found_major}.{found_minor} is not supported (this build writes {supported_major}.{supported_minor} and reads {supported_major}.x)")]
    VersionMismatch {
        found_major: u16,
        found_minor: u16,
        supported_major: u16,
        supported_minor: u16,
    },

    #[error("model file checksum mismatch")]
    Checksum,

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("dataset file {path} not found. {hint}")]
    MissingDataset { path: PathBuf, hint: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
