use thiserror::Error;

use crate::face::Emotion;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaceError {
    #[error("{dof} is not finite")]
    NonFinite { dof: &'static str },
    #[error("{dof} = {value} outside [{min}, {max}]")]
    OutOfRange {
        dof: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("weight for {emotion} = {value} outside [0, 1]")]
    WeightOutOfRange { emotion: Emotion, value: f64 },
    #[error("affect coordinate {axis} = {value} outside [-1, 1]")]
    AffectOutOfRange { axis: &'static str, value: f64 },
    #[error("basis set is missing {0}")]
    MissingBasis(Emotion),
    #[error("neutral is not a basis emotion")]
    NeutralAsBasis,
    #[error("unknown emotion {0:?}")]
    UnknownEmotion(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisLoadError {
    #[error("basis document does not parse: {0}")]
    Parse(String),
    #[error("unsupported basis schema {0}")]
    Schema(String),
    #[error("basis document has no entry for {0}")]
    MissingEmotion(String),
    #[error("unknown basis entry {0:?}")]
    UnknownEntry(String),
    #[error("basis entry {0:?} is not a table")]
    NotATable(String),
    #[error("{entry}: unknown field {field:?}")]
    UnknownField { entry: String, field: String },
    #[error("{entry}: missing field {field}")]
    MissingField { entry: String, field: &'static str },
    #[error("{entry}.{field} is not a finite number")]
    NotANumber { entry: String, field: &'static str },
    #[error("{entry}.{field} = {value} is out of range")]
    OutOfRange {
        entry: String,
        field: &'static str,
        value: f64,
    },
    #[error("invalid basis: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnimationError {
    #[error("time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("transition duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pupil target for {0} is unspecified")]
    TargetUnspecified(Emotion),
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error(transparent)]
    Face(#[from] FaceError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error("primitive {id} leaves the canvas")]
    OutOfBounds { id: String },
}
