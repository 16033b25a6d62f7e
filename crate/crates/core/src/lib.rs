// `!(x > 0.0)` is meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical toolkit for variable-exponent free-discontinuity energies.
//!
//! The crate is organised bottom-up:
//!
//! * [`varexp`]: grids, exponent fields, the modular and the Luxembourg norm,
//!   log-Hölder and embedding diagnostics.
//! * [`sbv`]: grid functions with explicit crack sets, quantiles, the
//!   truncation operator, piecewise-constant projection and cut-off gluing.
//! * [`energy`]: bulk/surface densities, the discrete free-discontinuity
//!   energy and hypothesis validators.
//! * [`cell`]: Dirichlet cell problems over Sobolev, piecewise-constant and
//!   SBV competitors.
//! * [`limits`]: blow-up density estimates, separation-of-scales checks, the
//!   surface perturbation ladder and the 1D homogenization oracle.
//! * [`cli`]: experiment configuration, orchestration and CSV/report output.

pub mod cell;
pub mod cli;
pub mod energy;
pub mod error;
pub mod limits;
pub mod sbv;
pub mod varexp;

pub use error::{Error, Result};
