//! Library half of the `threedpm` binary: configuration, commands and
//! their error mapping.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, Result};
