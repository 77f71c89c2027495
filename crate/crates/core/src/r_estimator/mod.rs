//! Preliminary estimators, cross-information line searches and the one-step
//! R-estimator of the mixing matrix.

pub mod cross_info;
pub mod one_step;
pub mod preliminary;

pub use cross_info::{
    estimate_cross_info, h_lambda, line_search_root, CrossInfoEstimates, LineSearchOptions, LineSearchTrace,
};
pub use one_step::{
    alpha_beta, covariance_estimate, definitional_update, explicit_update, one_step_estimate, squared_error,
    OneStepOptions, OneStepRecord, OneStepResult, Preliminary,
};
pub use preliminary::{fastica_pow3, fastica_unmixing, fobi, fobi_fit, location_median, whiten, FobiFit, Whitening};
