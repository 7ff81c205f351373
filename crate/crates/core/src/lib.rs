//! Long-term multi-object mask tracking for group-housed animals.
//!
//! The crate turns per-frame instance masks into identity-consistent tracks
//! across consecutive video clips and scores them against ground truth.

pub mod assign;
pub mod error;
pub mod filters;
pub mod image;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod reid;
pub mod render;
pub mod simgen;
pub mod track;

pub use error::{Error, Result};
