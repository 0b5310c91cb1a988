use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("clip too short: {samples} samples, need at least {needed}")]
    ClipTooShort { samples: usize, needed: usize },

    #[error("negative magnitude {value} at ({row}, {col})")]
    NegativeMagnitude { row: usize, col: usize, value: f64 },

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("degenerate covariance")]
    DegenerateCovariance,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("oracle infeasible: {units} units exceeds the enumeration limit of {limit}")]
    OracleInfeasible { units: usize, limit: usize },

    #[error("track too short: {frames} frames, need at least {needed}")]
    TrackTooShort { frames: usize, needed: usize },

    #[error("weight-cost list has {got} entries for {layers} layers")]
    WeightCostCount { layers: usize, got: usize },

    #[error("no evaluable tags")]
    NoEvaluableTags,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("duplicate clip id '{0}'")]
    DuplicateClip(String),

    #[error("missing audio file for clip '{clip}': {path}")]
    MissingAudio { clip: String, path: PathBuf },

    #[error("missing {0}")]
    MissingArtifact(String),

    #[error("bad matrix file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag used as the first field of CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ClipTooShort { .. } => "clip-too-short",
            Error::NegativeMagnitude { .. } => "negative-magnitude",
            Error::InvalidAudio(_) => "invalid-audio",
            Error::EmptyTrainingSet => "empty-training-set",
            Error::DegenerateCovariance => "degenerate-covariance",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Diverged { .. } => "diverged",
            Error::OracleInfeasible { .. } => "oracle-infeasible",
            Error::TrackTooShort { .. } => "track-too-short",
            Error::WeightCostCount { .. } => "weight-cost-count",
            Error::NoEvaluableTags => "no-evaluable-tags",
            Error::Config(_) => "config",
            Error::ManifestParse { .. } => "manifest-parse",
            Error::DuplicateClip(_) => "duplicate-clip",
            Error::MissingAudio { .. } => "missing-audio",
            Error::MissingArtifact(_) => "missing-artifact",
            Error::Format { .. } => "format",
            Error::Wav(_) => "wav",
            Error::Io(_) => "io",
        }
    }
}
