//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("more clients than dimensions: n={n} > d={d}")]
    MoreClientsThanDims { n: usize, d: usize },

    #[error("sign sum {value} at index {index} outside [-{n}, {n}] or wrong parity for n={n}")]
    InvalidSignSum { index: usize, value: i32, n: usize },

    #[error("ring step {step} outside [1, {max}]")]
    StepOutOfRange { step: usize, max: usize },

    #[error("consensus threshold {lambda} outside [-{n}, {n}]")]
    LambdaOutOfRange { lambda: i32, n: usize },

    #[error("entry width m={m} too small for sign sums in [-{n}, {n}]; need {needed} bits")]
    EntryWidthTooSmall { m: u32, n: usize, needed: u32 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("krum requires n >= f + 3 (n={n}, f={f})")]
    KrumTooFewClients { n: usize, f: usize },

    #[error("trimmed mean requires n > 2k (n={n}, k={k})")]
    TrimTooAggressive { n: usize, k: usize },

    #[error("label flip requires at least 2 classes (got {classes})")]
    TooFewClasses { classes: usize },

    #[error("client {client} has an empty data shard")]
    EmptyShard { client: usize },

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
