//! Pipeline orchestration for the Gesture Operational Model toolkit: run
//! configuration, benchmark fetching, staged processing and report output.

pub mod config;
pub mod error;
pub mod fetch;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod plot;

pub use config::{Overrides, RunConfig};
pub use error::{Error, Result};
pub use manifest::Manifest;
pub use pipeline::{run_stage, Stage, StageOutput};
