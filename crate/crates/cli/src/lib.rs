//! Command-line front end and HTTP service for `pmap-cutout`.

pub mod cli;
pub mod service;
pub mod wire;

pub use cli::cli_main;
