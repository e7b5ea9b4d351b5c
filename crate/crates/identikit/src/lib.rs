//! Command-line toolkit over `identikit-core`: run configuration, CSV/JSON
//! file formats, plots, and the staged analysis workflow.
//!
//! The binary exposes one subcommand per study type (simulate, forward,
//! sobol, fit, profile, bootstrap, structural, workflow); every command
//! reads a JSON [`config::RunConfig`], writes its outputs into an output
//! directory, and records a manifest with content hashes.

pub mod assemble;
pub mod commands;
pub mod config;
pub mod dataio;
pub mod error;
pub mod outdir;
pub mod plot;
pub mod report;

pub use error::{CliError, ExitCode};
