//! Command-line front end: JSON run configs, subcommand dispatch, tables on
//! stdout and CSV/JSON files in the output directory.

pub mod commands;
pub mod config;
pub mod output;
