//! Increment-ratio (IR) roughness statistics for equispaced samples of a path
//! on `[0, 1]`, together with the limit functions that turn them into
//! estimators of the Hurst exponent `H` and the stable index `alpha`.
//!
//! This crate is `no_std` and only needs `alloc`. Simulation, Monte Carlo
//! table construction, file formats and the command-line front end live in
//! the `roughir` crate.

#![no_std]
// `!(x > y)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod gaussian;
pub mod increments;
pub mod interp;
pub mod normal;
pub mod path;
pub mod stable;
pub mod stats;
pub mod sum;
pub mod variance_table;

pub use error::{Error, Result};
pub use gaussian::{
    estimate_h, fbm_increment_cov, invert_lambda2, lambda, lambda0, lambda_p, rho_p, s2_sq,
    HurstEstimate, LAMBDA2_RANGE,
};
pub use increments::{filtered_increment, make_binomial_filter, p_increment, Filter};
pub use path::SampledPath;
pub use stable::{estimate_alpha, sample_sym_stable, AlphaEstimate, LambdaTildeTable};
pub use stats::{psi, psi0, r0_pn, r0_tilde_2n, r_an, r_local, r_pn, r_tilde_2n, IrSummary};
pub use variance_table::VarianceTable;
