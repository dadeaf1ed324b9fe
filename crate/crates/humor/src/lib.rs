//! Command-line toolkit around `humor-core`: joke ingestion, dataset and
//! model files, and the training/evaluation workflows.

pub mod cli;
pub mod error;
pub mod files;
pub mod ingest;
pub mod store;
pub mod workflow;

pub use error::{Error, Result};
pub use humor_core;
