//! File IO, the binary model format, run configuration and the command-line
//! commands for the `udparse-core` joint tagger, lemmatizer and parser.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod model_file;
pub mod synth;

pub use error::{CliError, Result};
