use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedRecord { line: Option<usize>, reason: String },

    #[error("bad vote count{}: field `{field}` must be a non-negative integer", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    BadVoteCount { line: Option<usize>, field: &'static str },

    #[error("malformed targeting payload: {0}")]
    MalformedTargets(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty after applying min_df={min_df}")]
    EmptyVocabulary { min_df: usize },

    #[error("training data contains a single class")]
    SingleClassTraining,

    #[error("feature {feature} has negative value {value}")]
    NegativeFeature { feature: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} advertisers, found {found}")]
    InsufficientGroups { needed: usize, found: usize },

    #[error("tree {tree} has no usable cover statistics")]
    MissingCover { tree: usize },

    #[error("brute-force Shapley supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },

    #[error("attribution matrix is empty")]
    EmptyMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unsupported schema version {found} (supported: {supported})")]
    SchemaVersion { found: String, supported: String },

    #[error("{path} already exists (pass --force to overwrite)")]
    AlreadyExists { path: PathBuf },

    #[error("incompatible bundles: {0}")]
    IncompatibleBundles(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("bootstrap iteration {iteration}: {source}")]
    Bootstrap {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure was caused by user input rather than a bug or the environment.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Json(_) | Error::Csv(_))
    }
}
