//! Library side of the `cwsoc` command: configuration, subcommands and the
//! acceptance checks.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;
