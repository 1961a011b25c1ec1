//! File formats, experiment commands and charts for the `decorr` runner.
//! The numerical work lives in `decorr_core`.

pub mod args;
pub mod commands;
pub mod data;
mod error;
pub mod gnnb;
pub mod output;
pub mod plot;
pub mod svg;
pub mod sweep;

pub use error::{CliError, Result};
