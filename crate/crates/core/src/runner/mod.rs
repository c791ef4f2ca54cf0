//! Run configuration, initial data, file formats and the run loop.

pub mod config;
pub mod driver;
pub mod initial;
pub mod io;

pub use config::{Cadences, Initial, Method, RunConfig};
pub use driver::{compare, compare_dirs, run, RunArtifacts, Snapshot, StepRecord};
