use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErpError {
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid events: {0}")]
    InvalidEvents(String),
    #[error("invalid filter band [{lo}, {hi}] Hz at {sample_rate} Hz sampling")]
    InvalidBand { lo: f64, hi: f64, sample_rate: f64 },
    #[error("filter order must be at least 1")]
    InvalidOrder,
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("window [{start_ms}, {end_ms}] ms lies outside the epoch span [{span_start_ms}, {span_end_ms}] ms")]
    WindowOutsideSpan {
        start_ms: f64,
        end_ms: f64,
        span_start_ms: f64,
        span_end_ms: f64,
    },
    #[error("epoch sets do not share a time base: {0}")]
    TimeBaseMismatch(String),
    #[error("anova needs at least two groups with two or more samples each")]
    AnovaShape,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ErpError>;
