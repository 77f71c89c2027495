//! Special functions, unit-interval quadrature and dense linear algebra.

pub mod linalg;
pub mod quadrature;
pub mod special;

pub use linalg::{
    cholesky, inverse, inverse_spd, pseudoinverse, rank, solve_spd, spectral_norm, symmetric_eigen,
    Matrix, Vector,
};
pub use quadrature::{
    integrate_unit_interval, integrate_unit_interval_with, QuadPoint, QuadResult, QuadratureRule,
};
pub use special::{
    beta_inc, beta_inc_inv, chi2_cdf, erfc, chi2_quantile, chi2_sf, gamma_p, gamma_q, ln_gamma,
    noncentral_chi2_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile,
    std_normal_quantile_upper, std_normal_sf,
};
