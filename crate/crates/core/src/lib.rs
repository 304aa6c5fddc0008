//! Hierarchical multimodal expert networks trained by gradient descent inside
//! an evolutionary outer loop.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, threads or the command line lives in the `hierfuse` crate.
//!
//! Layout:
//! - [`nn`]: dense layers, MLPs with exact reverse-mode gradients, flat parameter
//!   vectors and Adam.
//! - [`model`]: modality experts, the shared expert, per-level fusion, task
//!   attention, gated task towers and the per-stream transfer probes.
//! - [`objectives`]: task losses, the attention-weighted multi-task loss, KL
//!   transfer and the joint objective.
//! - [`evolution`]: genomes, blend crossover, Gaussian mutation, tournament
//!   selection and the generational loop.
//! - [`dataset`], [`metrics`], [`training`]: synthetic data, evaluation and
//!   the inner training loop with ablation switches.
//! - [`gradcheck`]: finite-difference verification of the joint-objective gradient.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;
pub mod rng;

pub mod dataset;
pub mod evolution;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod training;

pub use error::{Error, Result};
