use thiserror::Error;

use crate::cell::CellSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs live on incompatible grids or have inconsistent shapes.
    #[error("structural mismatch: {0}")]
    Structural(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("empty domain: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The small-jump-set condition required by the truncation operator fails.
    #[error("jump set too large: (2*gamma_iso*H(J_u cap B))^(d/(d-1)) = {lhs} > |B|/2 = {rhs} (gamma_iso = {gamma_iso})")]
    JumpSetTooLarge { lhs: f64, rhs: f64, gamma_iso: f64 },
    #[error("strip count k = {required} exceeds the configured maximum {max}")]
    StripCount { required: u64, max: u64 },
    #[error("density returned a non-finite value: {0}")]
    Density(String),
    #[error("growth bound violated: {0}")]
    Growth(String),
    #[error("solver did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<CellSolution>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
