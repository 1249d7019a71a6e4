//! Command-line companion to `ordmargin-core`: file formats, run manifests,
//! and the `gen`/`train`/`eval`/`export`/`check` subcommands.
//!
//! Module map:
//!
//! * [`commands`] — argument definitions and per-subcommand drivers.
//! * [`dataio`] — dataset and training-trace CSV formats.
//! * [`checkpoint`] — versioned JSON checkpoints.
//! * [`manifest`] — run manifests with config snapshots and timings.
//! * [`verify`] — the numerical verification battery behind `check`.
//! * [`error`] — the exit-code contract (0 ok, 1 runtime, 2 bad input,
//!   3 missing artifact).

pub mod checkpoint;
pub mod commands;
pub mod dataio;
pub mod error;
pub mod manifest;
pub mod verify;

pub use error::{CliError, Result};
