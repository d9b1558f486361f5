use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown climate code `{0}`")]
    UnknownClimate(String),

    #[error("point ({lat}, {lon}) lies outside the climate raster")]
    OutsideRaster { lat: f64, lon: f64 },

    #[error("malformed raster: {0}")]
    InvalidRaster(String),

    #[error("malformed geometry: {0}")]
    InvalidGeometry(String),

    #[error("too few records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("record {0} has no climate zone / geographical type")]
    UnenrichedRecord(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid hyperparameter `{name}` = {value}: {reason}")]
    InvalidHyperparameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("kernel matrix is not positive definite after nugget escalation")]
    SingularKernel,

    #[error("column mismatch: expected {expected:?}, got {got:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("observations have zero variance")]
    ZeroVariance,

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("region mask contains no grid cells")]
    EmptyMask,

    #[error("operation not supported for model kind {0}")]
    UnsupportedModelKind(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model artifact: {0}")]
    ModelFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage input missing: {0}")]
    StageInputMissing(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Short category label used by the CLI for exit messages.
    pub fn category(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) | Error::Io { .. } => "io",
            Error::Csv(_) | Error::Json(_) | Error::ModelFormat(_) => "format",
            Error::Config(_) | Error::InvalidArgument(_) => "config",
            Error::StageInputMissing(_) => "stage-input",
            Error::MissingColumn(_) | Error::EmptyInput(_) => "ingest",
            Error::UnknownClimate(_)
            | Error::OutsideRaster { .. }
            | Error::InvalidRaster(_)
            | Error::InvalidGeometry(_) => "geo",
            Error::TooFewRecords { .. } | Error::UnenrichedRecord(_) => "preprocess",
            Error::DegenerateInput(_)
            | Error::InvalidHyperparameter { .. }
            | Error::SingularKernel
            | Error::ColumnMismatch { .. }
            | Error::EmptyGrid
            | Error::UnsupportedModelKind(_) => "model",
            Error::LengthMismatch(..) | Error::ZeroVariance => "metric",
            Error::RegimeMismatch(_) | Error::EmptyMask => "product",
            Error::InvalidSpec(_) => "synth",
        }
    }
}
