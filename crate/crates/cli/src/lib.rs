//! Configuration and experiment drivers behind the `elastic-cloak` binary.

pub mod config;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, Command, Outcome, RunError};
