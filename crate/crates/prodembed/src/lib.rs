//! Std companion to `prodembed-core`: file formats, run configuration, a
//! thread-pool executor and the command implementations behind the
//! `prodembed` binary.

pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod exec;
pub mod formats;

pub use error::{Error, Result};
