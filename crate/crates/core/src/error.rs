use std::io;

use thiserror::Error;

/// Errors raised across the simulator and learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("device placement ({x:.3}, {z:.3}) lies outside the wall extent")]
    DeviceOutsideWall { x: f64, z: f64 },

    #[error("device projects outside the camera frustum")]
    DeviceOutsideFrustum,

    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    ImageSizeMismatch(usize, usize, usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pca needs at least two vectors, got {0}")]
    TooFewSamples(usize),

    #[error("all vectors are identical; nothing to project onto")]
    ZeroVariance,

    #[error("training data must contain both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("non-finite feature value in example {0}")]
    NonFinite(usize),

    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    #[error("degenerate pool: {0}")]
    DegeneratePool(String),

    #[error("initialization did not label both classes for each behavior within {0} trials")]
    InitializationFailed(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
