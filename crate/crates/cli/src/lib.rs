//! Command-line front end: JSON scenario configs, figure presets and CSV/JSON
//! output for spectra, spectrograms, interferometer maps, fits and EPR
//! reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{run, Cli};
pub use error::{CliError, Result};
