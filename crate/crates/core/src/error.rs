use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model container could not be parsed.
    #[error("model format error: {0}")]
    Format(String),

    /// The model parsed but its layers are inconsistent.
    #[error("model validation error: {0}")]
    ModelValidation(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// A transformation or configuration parameter is outside its legal range.
    #[error("parameter error: {0}")]
    Param(String),

    #[error("model has no neurons")]
    EmptyModel,

    /// Set algebra attempted across two different models.
    #[error("coverage maps belong to different models ({left:016x} vs {right:016x})")]
    ModelMismatch { left: u64, right: u64 },

    #[error("invalid input: {0}")]
    Input(String),

    /// A statistic is undefined because a sample has no spread.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("image format error: {0}")]
    ImageFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
