//! Library behind the `ldp` command-line tool.
//!
//! Commands run the full pipeline on prepared corpora: `prep` builds pairs
//! and a stratified split, `train` fits adapters with SFT or a preference
//! objective, `eval` scores greedy reports, `ablate` compares ranks or
//! phases, `efficiency` does adapter accounting and `score` summarises
//! physician score sheets. Every command that writes files also writes a
//! [`manifest::RunManifest`] with SHA-256 digests of its inputs and outputs.

pub mod commands;
pub mod config;
pub mod data;
mod error;
pub mod manifest;
pub mod session;

pub use config::{PipelineConfig, Seeds};
pub use error::{CliError, ErrorClass, Result};
