use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    /// A `labels.csv` row whose image is missing or unreadable.
    #[error("ingest error for frame {frame}: {reason}")]
    Ingest { frame: String, reason: String },

    #[error("frame {frame}: angle {angle_deg} deg outside [-25, 25]")]
    LabelRange { frame: String, angle_deg: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    /// A computed result contradicts an invariant that must always hold.
    #[error("internal invariant failed: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] steercov_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 1 for usage/config problems, 2 for bad inputs, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        use steercov_core::Error as E;
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Core(E::Param(_)) => 1,
            HarnessError::Ingest { .. }
            | HarnessError::LabelRange { .. }
            | HarnessError::Dataset(_)
            | HarnessError::Csv(_)
            | HarnessError::Io { .. } => 2,
            HarnessError::Core(
                E::Format(_)
                | E::ModelValidation(_)
                | E::Shape(_)
                | E::EmptyModel
                | E::Input(_)
                | E::ImageFormat(_)
                | E::Io(_),
            ) => 2,
            HarnessError::Core(E::ModelMismatch { .. } | E::DegenerateSample(_) | E::Json(_))
            | HarnessError::Invariant(_)
            | HarnessError::Json(_) => 3,
        }
    }
}
