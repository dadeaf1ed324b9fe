use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Errors produced by the core crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("class `{0}` has no examples")]
    MissingClass(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("no gradient recorded for parameter `{0}`")]
    MissingGradient(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenIdOutOfRange { id: u32, size: usize },
    #[error("example {example}: sequence span {span} is shorter than the widest filter ({width})")]
    SequenceTooShort {
        /// Example id, or `#<batch index>` when the id is not known.
        example: String,
        span: usize,
        width: usize,
    },
    #[error("non-finite loss at batch {batch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("corpus cannot fill {count} bin(s): {0:?}", count = .0.len())]
    DeficientBins(Vec<BinDeficit>),
    #[error("prediction/gold id mismatch: {0:?}")]
    IdMismatch(Vec<String>),
    #[error("checkpoint decode error: {0}")]
    Checkpoint(String),
}

/// A joint histogram cell whose quota exceeds the qualifying corpus sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinDeficit {
    pub word_bin: usize,
    pub char_bin: usize,
    pub quota: u64,
    pub available: u64,
}

pub type Result<T> = core::result::Result<T, CoreError>;
