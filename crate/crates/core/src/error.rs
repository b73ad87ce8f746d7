use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: rating {value} outside scale [{min}, {max}]")]
    OutOfScale {
        line: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid rating scale: min {min} must be below max {max}")]
    InvalidScale { min: f64, max: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "training diverged at iteration {iteration} (objective {objective:e}); \
         learning rate gamma = {gamma:e} is too high"
    )]
    Diverged {
        iteration: usize,
        objective: f64,
        gamma: f64,
    },

    #[error("objective is not finite while probing parameter {index}")]
    NonFiniteProbe { index: usize },

    #[error("repeat {repeat}: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
