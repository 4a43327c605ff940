//! Error type shared by all modules.

use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("region is empty")]
    EmptyRegion,

    #[error("cube {0} is a single cell, cannot subdivide")]
    DepthExhausted(String),

    #[error("cube {0} has no witness set")]
    MissingWitness(String),

    #[error("coefficient `{name}` is not elliptic (certified lambda = {lambda})")]
    NotElliptic { name: String, lambda: f64 },

    #[error("coefficient `{0}` has no closed-form gradient in the flux variable")]
    NotDifferentiable(String),

    #[error("solver stalled after {iters} iterations, relative residual {residual:.3e}")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("field is not a homogeneous solution: weak residual {residual:.3e} > {tol:.3e}")]
    NotHomogeneous { residual: f64, tol: f64 },

    #[error(
        "measure bound violated on cube {cube}: |Xi| = {xi_cells} cells > {bound:.3} cells \
         (broken hypothesis: lower-exponent constant too small or solver failure)"
    )]
    MeasureBoundViolated {
        cube: String,
        xi_cells: usize,
        bound: f64,
    },

    #[error("no admissible witness point in cube {0} (weak-type constant miscalibrated)")]
    NoWitness(String),

    #[error("weight vanishes on cube {0}")]
    DegenerateWeight(String),

    #[error("oscillation radius {0} is below one grid cell")]
    RadiusTooSmall(f64),

    #[error("domain mask is empty or disconnected")]
    BadDomain,

    #[error("dimension {0} is not supported (expected 1 or 2)")]
    BadDimension(usize),

    #[error("{0}")]
    Invalid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
