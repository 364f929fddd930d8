//! Batch front end for estimation-algebra and filtering runs: a TOML system
//! config goes in, versioned JSON reports and plot-ready CSV come out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigError, Overrides, RunConfig};
pub use report::{revalidate, Envelope, Manifest, Report, SCHEMA_VERSION};
pub use run::{config_hash, run, CliError, Command, RunDir};
