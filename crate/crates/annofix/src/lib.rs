//! File formats, configuration, parallel correction, reports and the
//! `annofix` command line on top of [`annofix_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;

pub use annofix_core;
pub use error::{Error, Result};
