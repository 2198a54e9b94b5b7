//! Batch front end for the genflow laboratory: scenario presets, layered
//! JSON configuration, the single-module subcommands, and the report and
//! plot-data files a run leaves behind.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{preset, resolve, resolve_module, Overrides, RunConfig, Scenario};
pub use error::{exit, CliError, Result};
pub use run::{execute, Assertion, Command, Outcome, Report};
