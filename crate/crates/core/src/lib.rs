//! Learnable activation functions with hand-derived gradients, a small
//! fully-connected network that hosts them, and tools for building and
//! evaluating ensembles of networks that differ in their activations.

pub mod activation;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod net;
pub mod seed;

pub use error::{Error, Result};
