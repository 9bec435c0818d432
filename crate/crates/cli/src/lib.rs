//! Library behind the `retouch` command: the staged pipeline, evaluation,
//! the invertibility check and dataset commands.

pub mod client;
pub mod commands;
pub mod error;
pub mod eval;
pub mod files;
pub mod invert;
pub mod pipeline;

pub use error::{CliError, ErrorClass};
