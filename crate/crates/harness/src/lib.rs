//! Configuration, persistence, statistics and experiment pipelines around
//! `wcgl-core`, plus the `wcgl` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod report;
pub mod stats;

pub use config::Config;
pub use error::{HarnessError, Result};
pub use report::Report;
