//! Searchable sign-language pipeline math: sign spotting, CTC decoding with a
//! character language model, temporal proposal linking, detection metrics,
//! fingerspelling retrieval scoring, and attention/gating fusion equations.
//!
//! Everything operates on precomputed scores, posteriorgrams, boxes, and
//! embeddings supplied as plain data; no neural network inference happens here.
//! All operations are pure and deterministic: given the same inputs (and seed,
//! where one is taken) they produce the same outputs on every run.

pub mod core;
pub mod ctc;
pub mod detect;
pub mod fusion;
pub mod linker;
pub mod lm;
pub mod matching;
pub mod metrics;
pub mod spot;

/// Errors shared across the crate's modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid segment: start {start} must be < end {end}")]
    InvalidSegment { start: usize, end: usize },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid score {0}: must be in [0, 1]")]
    InvalidScore(f64),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid posteriorgram: {0}")]
    InvalidPosteriorgram(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("label index {0} out of range for alphabet of size {1}")]
    InvalidLabelIndex(usize, usize),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero-norm vector in cosine distance")]
    ZeroNorm,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
