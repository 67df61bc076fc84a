//! Command-line pipeline around the `kinetext` library.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;
