#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Scenario runner for the plate-green library: config parsing, command
//! dispatch and JSON/CSV reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{parse_config_text, BandAxis, Command, ScenarioConfig, KEYS};
pub use report::{emit_band_data, write_samples_csv, RunReport, Status, SCHEMA};
pub use runner::{execute, run};
