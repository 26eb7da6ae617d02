//! Core algorithms for mining and evaluating weakly-supervised coaching data from pose-annotated
//! skill videos.
//!
//! Everything here is `no_std` + `alloc`: Procrustes alignment and PA-MPJPE, window search,
//! commentary prompt/answer handling, pair mining, the pose codec, and evaluation metrics.
//! File formats, the HTTP labeling client and the CLI live in the `coachmine` crate.
#![no_std]
extern crate alloc;

pub mod align;
pub mod codec;
pub mod commentary;
pub mod defaults;
pub mod error;
pub mod pairing;
pub mod pose;
pub mod retrieval;
pub mod text;

pub use error::{Error, Result};
