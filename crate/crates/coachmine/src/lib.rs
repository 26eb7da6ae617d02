//! File formats, configuration, the HTTP labeling client and pipeline stages for mining coaching
//! triples. The numerical work lives in `coachmine-core`; this crate adds IO and the CLI.

pub mod config;
pub mod error;
pub mod formats;
pub mod llm;
pub mod pipeline;
pub mod records;
pub mod synthetic;

pub use error::{Error, Result};
