//! File formats, experiment drivers and the command line for the
//! observation-cost MDP solvers in `ocm-core`.

pub mod table;

pub mod cli;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod model_io;

pub use error::{OcmError, Result};
