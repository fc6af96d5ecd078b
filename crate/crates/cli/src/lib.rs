//! Command-line front end: sample and config file formats, result writers
//! and subcommand handlers.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod dto;
pub mod error;
pub mod json;
pub mod svg;
