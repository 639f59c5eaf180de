//! Consensus clustering by power-method evolution on a balanced similarity
//! matrix.
//!
//! The pipeline: build an ensemble of clusterings ([`ensemble`]), sum their
//! co-membership matrices or take κ-nearest-neighbor overlaps
//! ([`consensus`]), scale the result to a symmetric doubly stochastic `P`
//! ([`balance`]), read the cluster count off the spectrum ([`uncouple`]) and
//! extract clusters from the evolution of a probability vector under `P`
//! ([`sca`]).

extern crate self as sca_core;

pub mod balance;
pub mod consensus;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod matrix;
pub mod pipeline;
pub mod sca;
pub mod uncouple;

pub use error::{Error, Result};

#[cfg(test)]
#[path = "../tests/common/oracles.rs"]
mod testutil;
