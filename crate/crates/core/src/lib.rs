//! Humor-classification core: tensors with reverse-mode autodiff, a small
//! transformer-encoder classifier, a CNN + highway baseline, dataset
//! construction, length-matched negative sampling and evaluation metrics.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, networking and
//! the command line live in the `humor` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod metrics;
pub mod models;
pub mod negmatch;
pub mod numcore;
pub mod record;
pub mod report;
mod rng;
pub mod synthetic;
pub mod tokenizer;
pub mod train;

pub use error::{CoreError, Result};
