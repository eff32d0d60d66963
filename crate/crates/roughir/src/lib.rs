//! Simulation, Monte Carlo limit tables, file formats and experiment
//! orchestration on top of [`roughir_core`].

// `!(x > y)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod io;
pub mod mc;
pub mod seed;
pub mod sim;
pub mod tables;

pub use error::{Error, Result};
pub use roughir_core as core;
