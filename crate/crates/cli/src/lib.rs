//! Configuration, file formats and subcommand pipelines for the
//! `obstacle-well` command-line tool.
//!
//! The numerical work lives in [`obstacle_well_core`]; this crate adds
//! everything that needs `std`: reading TOML configurations, writing CSV,
//! JSON, raw and PGM artifacts, hashing them into a manifest, and fanning
//! independent jobs out over threads.

pub mod config;
pub mod formats;
pub mod heatmap;
pub mod manifest;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, Command, Options, Outcome, Report, RunError};
