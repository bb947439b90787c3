//! File formats, the `llmap` command line and toy data for `llmap-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
