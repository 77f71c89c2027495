//! Signed-rank inference and one-step R-estimation for the mixing matrix of
//! symmetric independent component models `X = L Z + μ`.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`]: special functions, unit-interval quadrature, linear algebra.
//! * [`scores`]: symmetric component densities and cross-information integrals.
//! * [`mixing`]: the unit-diagonal parametrization, `vecd°` and normalization.
//! * [`signed_ranks`]: signed ranks, the rank-score matrix `T` and `Δ*`.
//! * [`inference`]: `Γ*`, the signed-rank tests and local power.
//! * [`r_estimator`]: FOBI, FastICA, line-search coefficient estimates and
//!   the one-step estimator.
//! * [`harness`]: seeded Monte Carlo campaigns and CSV/SVG reporting.
//!
//! Loops over independent work (replications, line searches) follow an
//! [`Execution`] policy; the `parallel` feature backs it with rayon.

pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
pub mod mixing;
pub mod numerics;
pub mod par;
pub mod r_estimator;
pub mod scores;
pub mod signed_ranks;

pub use error::{Error, Result};
pub use inference::{
    build_gamma_star, local_power, test_linear, test_simple, GammaStarSpec, LinearHypothesis, Location,
    SimpleTestOptions, TestReport,
};
pub use mixing::{
    normalize_pi, perturb_for_line_search, residuals, vecd_expand, vecd_strip, Flavor, MixingMatrix, ThetaParam,
};
pub use numerics::{Matrix, Vector};
pub use par::Execution;
pub use r_estimator::{
    estimate_cross_info, fastica_pow3, fobi, location_median, one_step_estimate, squared_error, CrossInfoEstimates,
    LineSearchOptions, OneStepOptions, OneStepResult, Preliminary,
};
pub use scores::{ComponentDensities, SymmetricDensity};
pub use signed_ranks::{compute_signed_ranks, efficient_central_sequence, rank_score_matrix, SignedRankTable};
