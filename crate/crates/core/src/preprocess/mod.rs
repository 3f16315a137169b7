//! Raw joint-angle cleanup: low-pass filtering, wrap removal and segmentation.

mod filter;
mod psd;
mod segment;
mod unwrap;

use thiserror::Error;

pub use filter::{butterworth_lowpass, design_lowpass, magnitude_squared, Biquad, FilterSpec, DEFAULT_ORDER};
pub use psd::{select_cutoff, welch, CUTOFF_CEIL_HZ, CUTOFF_FLOOR_HZ};
pub use segment::{read_annotations, segment, validate_annotations, write_annotations, SegmentAnnotation};
pub use unwrap::{invert_unwrap, unwrap_discontinuities, UnwrapLog, OUTPUT_BOUND_DEG, UNWRAP_LOG_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid filter: {0}")]
    Spec(String),
    #[error("frame {frame}: value {value} outside ±{limit}°")]
    Range { frame: usize, value: f64, limit: f64 },
    #[error("segment out of bounds: {0}")]
    Bounds(String),
    #[error("overlapping segments: {0}")]
    Overlap(String),
    #[error("annotation file: {0}")]
    Annotation(String),
}
