//! Gesture recognition with per-class Gaussian HMMs and stratified
//! cross-validation.

mod cv;
mod hmm;

use thiserror::Error;

pub use cv::{cross_validate, CvConfig, CvReport, Standardizer, CV_CSV_HEADER};
pub use hmm::{classify, hmm_fit, loglik, HmmConfig, HmmFit, HmmModel, HmmTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognitionError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("feature {feature} has zero variance")]
    DegenerateData { feature: usize },
    #[error("no class models to classify with")]
    EmptyModelSet,
    #[error("empty sequence")]
    EmptySequence,
    #[error("no training sequences")]
    NoSequences,
    #[error("sequence {index} has {len} frames, fewer than the {n_states} left-to-right states")]
    SequenceTooShort { index: usize, len: usize, n_states: usize },
    #[error("class {class} has {count} repetition(s); at least 2 are needed")]
    InsufficientData { class: String, count: usize },
    #[error("invalid HMM: {0}")]
    Model(String),
    #[error("configuration: {0}")]
    Config(String),
}
