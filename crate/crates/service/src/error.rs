use thiserror::Error;

use hybrid_face::{AnimationError, BasisLoadError, FaceError, RenderError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    Basis(#[from] BasisLoadError),
    #[error(transparent)]
    Animation(#[from] AnimationError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Erp(#[from] erp_lab::ErpError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("replay log line {line}: {message}")]
    ReplayLog { line: usize, message: String },
    #[error("export to {path} failed: {source}")]
    Export {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ServiceError>;
