//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vector is not unit length (|v| = {0})")]
    NonUnitVector(f64),

    #[error("degenerate Q-tensor: top eigenvalue gap {gap} below tolerance {tol}")]
    DegenerateQ { gap: f64, tol: f64 },

    #[error("director lift inconsistency at node {node}: line field is not orientable on this region")]
    LiftInconsistency { node: usize },

    #[error("insufficient padding: kernel mass {mass:.3e} outside pad exceeds 1e-14")]
    InsufficientPadding { mass: f64 },

    #[error("sphere grid too coarse: exact degree {have} < required {need}")]
    GridTooCoarse { have: usize, need: usize },

    #[error("root bracketing failed for alpha = {alpha}")]
    NoBracket { alpha: f64 },

    #[error("normalization hit a zero vector (|v| = {0}); step too large")]
    ZeroVector(f64),

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("admissible-set constraint violated on the boundary shell: max deviation {0:.3e}")]
    ConstraintViolation(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
