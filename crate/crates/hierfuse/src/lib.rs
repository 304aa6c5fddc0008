//! Filesystem, threading and command-line layer over [`hierfuse_core`].
//!
//! - [`jsonl`]: dataset files with a header record.
//! - [`checkpoint`]: JSON model checkpoints.
//! - [`config`]: the [`RunConfig`] file format.
//! - [`runner`]: multi-seed experiments and their artifacts.
//! - [`parallel`]: a rayon-backed evaluation pool.
//! - [`report`], [`cli`]: tables and the `hierfuse` binary.

pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod jsonl;
pub mod parallel;
pub mod report;
pub mod runner;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use hierfuse_core as core;
