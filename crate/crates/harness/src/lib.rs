//! Experiment harness: configuration, dataset ingestion, experiment drivers
//! and report writers behind the `steercov` command.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod fixture;
pub mod report;

pub use config::RunConfig;
pub use dataset::{Dataset, Frame};
pub use error::{HarnessError, Result};
