use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("point sets differ in size: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("sequences differ in frame count: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least 3 points are required for a rigid fit, got {0}")]
    TooFewPoints(usize),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("window [{start}, {start}+{length}) does not fit a sequence of {sequence_len} frames")]
    WindowOutOfBounds {
        start: usize,
        length: usize,
        sequence_len: usize,
    },
    #[error("no candidate window: {0}")]
    NoCandidateWindow(&'static str),
    #[error("corpus of {corpus} frames is smaller than the requested codebook size {requested}")]
    CorpusTooSmall { corpus: usize, requested: usize },
    #[error("token {token} is out of range for a codebook of size {size}")]
    TokenOutOfRange { token: u32, size: usize },
    #[error("codebook version mismatch: expected {expected}, found {found}")]
    CodebookMismatch { expected: String, found: String },
    #[error("candidate {id} lacks the {modality} modality")]
    MissingModality { id: String, modality: &'static str },
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("hypothesis is empty after tokenization")]
    EmptyHypothesis,
    #[error("text is empty after tokenization")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("labeling service failed: {0}")]
    Service(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
