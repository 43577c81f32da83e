//! Hierarchical graph-based multi-object tracking for team sports.

pub mod assign;
pub mod error;
pub mod eval;
pub mod features;
pub mod hierarchy;
pub mod ingest;
pub mod model;
pub mod rounding;
pub mod scorer;
pub mod synth;

pub use error::{Error, Result};
