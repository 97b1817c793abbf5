use thiserror::Error;

use crate::grid::Space;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two in [8, 256]")]
    InvalidGridSize(usize),

    #[error("box length must be positive and finite, got {0}")]
    InvalidBoxLength(f64),

    #[error("expected a {expected:?}-space field, got {found:?}")]
    SpaceMismatch { expected: Space, found: Space },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),

    #[error("density has imaginary part {0:e} beyond tolerance")]
    ComplexDensity(f64),

    #[error("invalid split state: {0}")]
    InvalidState(String),

    #[error("a(eta) = {0:e} is too close to the boundary of the unit ball")]
    Boundary(f64),

    #[error("inner maximization not converged (gradient norm {0:e})")]
    InnerNotConverged(f64),

    #[error("{stage} did not converge in {iters} iterations (gradient norm {grad_norm:e})")]
    NotConverged {
        stage: &'static str,
        iters: usize,
        grad_norm: f64,
    },

    #[error("{stage} line search failed at iteration {iter}")]
    LineSearch { stage: &'static str, iter: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("positive-energy projection of the trial state collapsed (norm {0:e})")]
    ProjectionCollapse(f64),

    #[error("malformed field dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
