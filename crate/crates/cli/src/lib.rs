//! Batch front-end for `pam-core`: JSON run configurations in, JSON or CSV
//! result documents out.

pub mod config;
pub mod runner;

pub use config::{parse_config, parse_config_with, ConfigError, Overrides, RunConfig};
pub use runner::{render, run, summary, RunResult};
