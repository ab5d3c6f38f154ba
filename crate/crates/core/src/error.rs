use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the grasp pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
    #[error("angle is undefined for a zero (cos, sin) vector")]
    UndefinedAngle,
    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid quaternion: {0}")]
    InvalidQuaternion(String),
    #[error("invalid grasp: {0}")]
    InvalidGrasp(String),
    #[error("vector must be unit length, got norm {0}")]
    NotUnit(f64),
    #[error("surface normal is degenerate: {0}")]
    DegenerateNormal(String),
    #[error("mask is empty")]
    EmptyMask,
    #[error("center ({u}, {v}) is not inside the mask")]
    InvalidCenter { u: usize, v: usize },
    #[error("object is degenerate: {0}")]
    DegenerateObject(String),
    #[error("no valid depth pixels to inpaint from")]
    Uninpaintable,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("tape does not match request: {0}")]
    TapeMismatch(String),
    #[error("missing gradient for trainable layer {0}")]
    MissingGradient(String),
    #[error("background extraction module has not been pretrained")]
    MissingBem,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty trial set")]
    EmptyTrials,
    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("config error: {0}")]
    Config(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
