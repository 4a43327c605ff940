//! Dyadic sparse domination toolkit for divergence-form elliptic problems.
//!
//! The crate verifies, at desk scale and in exact cell arithmetic, the chain
//! of estimates that dominates the gradient of a solution to
//!
//! ```text
//! div a(x, ∇u(x)) = div F(x) + f(x)
//! ```
//!
//! by a sparse family of dyadic cubes: local Dirichlet solvers on tripled
//! cubes, stopping-time selection of child cubes, sparse forms, dyadic
//! maximal operators, and the Muckenhoupt-weighted consequences.
//!
//! Everything lives on a uniform grid covering `3Q0 = [-1,2)^n` with
//! `3·2^L` cells per side, so that every dyadic subcube of `Q0 = [0,1)^n`
//! and its concentric triple are cell-aligned. Fields are piecewise constant
//! on cells, region membership is integer arithmetic, and all sparsity and
//! measure-bound verdicts are exact.

// index loops over the spatial dimension read better than iterator
// chains in the matrix kernels
#![allow(clippy::needless_range_loop)]

pub mod coeff;
pub mod data;
pub mod domain;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod grid;
pub mod maximal;
pub mod solver;
pub mod sparse;
pub mod weights;

pub use coeff::{
    linearize_pair, make_coefficient, oscillation_modulus, oscillation_profile,
    verify_ellipticity, CoeffSpec, EllipticCoefficient, Flux, MatrixField, OscillationProfile,
};
pub use data::FieldGen;
pub use domain::{Domain, DomainKind, Regularity};
pub use dyadic::{verify_sparsity, Cube, SparseFamily, SparsityReport};
pub use error::{Error, Result};
pub use field::{GridField, Region};
pub use grid::{CellBox, Grid};
pub use maximal::{
    dyadic_maximal, fractional_maximal, measure_weak_norm_ratio, oscillation_function_s,
    weak_norm, weighted_dyadic_maximal, MaximalResult, Witness,
};
pub use solver::{
    check_caccioppoli, check_energy_estimate, energy_norm, estimate_lower_constant,
    estimate_reverse_holder, face_energy, maximal_weak_norm_bound, sobolev_constant,
    select_upper_exponent, solve_dirichlet, solve_nonlinear, solve_region, weak_residual,
    CaccioppoliReport,
    EnergyReport, ReverseHolderEstimate, RhMode, SolveStats, Solution, SolverConfig,
};
pub use sparse::{
    build_sparse_family, calibrate_dini_constants, calibrate_stopping_threshold,
    density_stoppers, dini_constant,
    dini_iteration_step, iteration_step, random_sparse_family, sparse_form,
    sparse_form_first_order, theorem_constant, threshold_stoppers, BuildMode, DiniCalibration,
    DiniConstants, FormConvention, IterationReport, SparseBoundCertificate, SparseParams,
};
pub use weights::{
    ap_constant, rh_constant, sparse_to_weighted_check, weighted_gradient_bound_check,
    GradientBoundReport, OscMode, Weight, WeightedChainReport,
};
