//! Gesture Operational Model toolkit.
//!
//! Ingests BVH motion capture, cleans joint-angle series, fits one
//! second-order state-space equation per descriptor, simulates and scores
//! the resulting system, ranks sensors by coefficient significance and
//! recognises gestures with per-class HMMs.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below fix the common choice.

// `!(x > 0)` rejects NaN as well; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bvh;
pub mod dexterity;
pub mod gom;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod recognition;
pub mod scalar;
pub mod similarity;

pub use scalar::Scalar;

pub type SkeletonF64 = bvh::Skeleton<f64>;
pub type MotionClipF64 = bvh::MotionClip<f64>;
pub type DescriptorFramesF64 = gom::DescriptorFrames<f64>;
pub type GomModelF64 = gom::GomModel<f64>;
pub type GomSystemF64 = gom::GomSystem<f64>;
pub type MetricReportF64 = metrics::MetricReport<f64>;
pub type GestureMetricsF64 = metrics::GestureMetrics<f64>;
pub type EquationReportF64 = dexterity::EquationReport<f64>;
pub type HmmModelF64 = recognition::HmmModel<f64>;
pub type UnwrapLogF64 = preprocess::UnwrapLog<f64>;
pub type FilterSpecF64 = preprocess::FilterSpec<f64>;
