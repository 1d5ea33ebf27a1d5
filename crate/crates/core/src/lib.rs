//! Low-rank quantum state tomography by momentum-inspired factored gradient
//! descent, with a state and Pauli-measurement simulator, full-tomography
//! baselines, a data-parallel gradient engine and a synthetic matrix-sensing
//! benchmark.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod io;
pub mod mifgd;
pub mod parallel;
pub mod pauli;
pub mod rng;
pub mod sensing;
pub mod states;
pub mod synthetic;
pub mod tomography;

pub use error::{Error, Result};
