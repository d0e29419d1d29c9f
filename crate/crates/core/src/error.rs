use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // schema_config
    #[error("{path}: missing required column `{column}`")]
    MissingHeader { path: PathBuf, column: String },
    #[error("duplicate key_variable `{0}` in feature mapping")]
    DuplicateKeyVariable(String),
    #[error("cannot infer family for `{key}` from source `{source_dataset}`")]
    UnknownFamily { key: String, source_dataset: String },
    #[error("invalid feature spec `{key}`: {reason}")]
    InvalidSpec { key: String, reason: String },
    #[error("no valid field records survived cleaning")]
    EmptyAfterCleaning,
    #[error("fetch plan is empty (fields or specs missing)")]
    EmptyPlan,

    // acquire
    #[error("no fetcher registered for platform `{0}`")]
    NoFetcherForPlatform(String),
    #[error("platform `{0}` is claimed by more than one fetcher")]
    AmbiguousFetcher(String),
    #[error("cache entry {0} failed checksum verification")]
    CacheCorruption(String),
    #[error("derivation {rule} needs input series `{name}`")]
    MissingInputSeries { rule: String, name: String },
    #[error("input series for {0} are not date-aligned")]
    MisalignedDates(String),
    #[error("HTTP status {status} from {url}")]
    HttpStatus { status: u16, url: String },
    #[error("cannot parse payload: {0}")]
    ParsePayload(String),
    #[error("{failed} of {total} fetch tasks FAILED (threshold {threshold})")]
    FailureThreshold { failed: usize, total: usize, threshold: f64 },

    // harmonize
    #[error("fetch result references unknown field_id `{0}`")]
    UnknownFieldId(String),
    #[error("column name collision: `{a}` and `{b}` both map to `{column}`")]
    ColumnNameCollision { a: String, b: String, column: String },
    #[error("no feature spec for column `{0}`")]
    SpecMissingForColumn(String),

    // engineer
    #[error("empty window: no dated inputs")]
    EmptyWindow,

    // screen_select
    #[error("need at least {needed} paired samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("selection pool is empty")]
    EmptyPool,

    // preprocess
    #[error("iterative imputation needs {needed} columns and {min_rows} rows, got {columns} and {rows}")]
    TooFewColumns { needed: usize, min_rows: usize, columns: usize, rows: usize },

    // learners
    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model has not been fitted")]
    NotFitted,

    // evaluate
    #[error("need at least {k} rows for {k}-fold split, got {n}")]
    TooFewRows { n: usize, k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no models available for ensembling")]
    NoModels,
    #[error("exact Shapley enumeration supports at most {max} features, got {got}")]
    TooManyFeaturesForExact { max: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // plumbing
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("failed to write report files: {}", .0.join("; "))]
    ReportWrite(Vec<String>),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }
}
