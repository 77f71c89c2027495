//! The one-step R-estimator
//! `L̂ = L̃ + n^{-1/2} L̃[N̂ - diag(L̃N̂)]`, `N̂ = Âᵀ⊙T + B̂ᵀ⊙Tᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{build_gamma_star, GammaStarSpec};
use crate::mixing::{discretize, vecd_strip, MixingMatrix, ThetaParam};
use crate::numerics::{inverse, Matrix, Vector};
use crate::par::Execution;
use crate::scores::ComponentDensities;
use crate::signed_ranks::central_sequence_from_t;

use super::cross_info::{estimate_cross_info_with_t, CrossInfoEstimates, LineSearchOptions, LineSearchTrace};
use super::preliminary::{fastica_pow3, fobi, location_median};

/// Starting point of the one-step update.
#[derive(Debug, Clone, PartialEq)]
pub enum Preliminary {
    Fobi,
    FastIca { seed: u64 },
    Given(MixingMatrix),
}

impl Preliminary {
    pub fn name(&self) -> &'static str {
        match self {
            Preliminary::Fobi => "fobi",
            Preliminary::FastIca { .. } => "fastica",
            Preliminary::Given(_) => "given",
        }
    }

    pub fn fit(&self, x: &Matrix) -> Result<MixingMatrix> {
        match self {
            Preliminary::Fobi => fobi(x),
            Preliminary::FastIca { seed } => fastica_pow3(x, *seed),
            Preliminary::Given(l) => Ok(l.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneStepOptions {
    pub preliminary: Preliminary,
    pub line_search: LineSearchOptions,
    /// Grid constant for discretizing `θ̃`; `None` is off.
    pub discretize: Option<f64>,
    pub execution: Execution,
}

impl Default for OneStepOptions {
    fn default() -> Self {
        Self {
            preliminary: Preliminary::Fobi,
            line_search: LineSearchOptions::default(),
            discretize: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneStepResult {
    pub l_hat: MixingMatrix,
    pub preliminary: &'static str,
    pub l_tilde: MixingMatrix,
    pub mu_hat: Vector,
    pub t: Matrix,
    pub cross_info: CrossInfoEstimates,
    /// Estimated covariance of `vecd° L̂` (already divided by `n`).
    pub covariance_hat: Matrix,
    pub n: usize,
}

/// `α_rs = γ_rs / (γ_rs γ_sr - ρ_rs ρ_sr)` and `β_rs = -ρ_rs / (…)`, zero
/// on the diagonal. Pairs with a denominator below 1e-6 are degenerate.
pub fn alpha_beta(gamma: &Matrix, rho: &Matrix) -> Result<(Matrix, Matrix)> {
    let p = gamma.nrows();
    let mut a = Matrix::zeros(p, p);
    let mut b = Matrix::zeros(p, p);
    for r in 0..p {
        for s in 0..p {
            if r == s {
                continue;
            }
            let det = gamma[(r, s)] * gamma[(s, r)] - rho[(r, s)] * rho[(s, r)];
            if !(det.abs() > 1e-6) {
                return Err(Error::DegeneratePair { r: r.min(s) + 1, s: r.max(s) + 1, value: det });
            }
            a[(r, s)] = gamma[(r, s)] / det;
            b[(r, s)] = -rho[(r, s)] / det;
        }
    }
    Ok((a, b))
}

/// Explicit update from `L̃`, `T` at `θ̃`, and the coefficient estimates.
pub fn explicit_update(l_tilde: &MixingMatrix, t: &Matrix, gamma: &Matrix, rho: &Matrix, n: usize) -> Result<MixingMatrix> {
    let (a, b) = alpha_beta(gamma, rho)?;
    let big_n = a.transpose().component_mul(t) + b.transpose().component_mul(&t.transpose());
    let lt = l_tilde.matrix();
    let ln = lt * &big_n;
    let correction = lt * (big_n - Matrix::from_diagonal(&ln.diagonal()));
    let mut l_hat = lt + correction / (n as f64).sqrt();
    l_hat.fill_diagonal(1.0);
    MixingMatrix::new(l_hat)
}

/// Definitional update `vecd° L̂ = vecd° L̃ + n^{-1/2} Γ̂*⁻¹ Δ*`, with `Γ̂*`
/// assembled at `L̃` from the coefficient estimates.
pub fn definitional_update(l_tilde: &MixingMatrix, t: &Matrix, gamma: &Matrix, rho: &Matrix, n: usize) -> Result<MixingMatrix> {
    let spec = GammaStarSpec::estimated(l_tilde.clone(), gamma.clone(), rho.clone())?;
    let g = build_gamma_star(&spec);
    let delta = central_sequence_from_t(l_tilde.inverse(), t);
    let step = inverse(&g)? * delta;
    MixingMatrix::from_vecd(&(l_tilde.vecd() + step / (n as f64).sqrt()))
}

/// `Γ̂*_{fg}⁻¹ Γ*_{L̂,f} Γ̂*_{fg}⁻ᵀ / n` with every factor evaluated at `L̂`.
pub fn covariance_estimate(
    l_hat: &MixingMatrix,
    f: &ComponentDensities,
    gamma: &Matrix,
    rho: &Matrix,
    n: usize,
) -> Result<Matrix> {
    let outer = inverse(&build_gamma_star(&GammaStarSpec::estimated(l_hat.clone(), gamma.clone(), rho.clone())?))?;
    let middle = build_gamma_star(&GammaStarSpec::at_target(l_hat.clone(), f)?);
    let cov = &outer * middle * outer.transpose() / n as f64;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Preliminary fit, median location, optional discretization, line
/// searches for `γ̂`/`ρ̂`, then the explicit one-step update.
pub fn one_step_estimate(x: &Matrix, f: &ComponentDensities, options: &OneStepOptions) -> Result<OneStepResult> {
    let p = f.dim();
    if x.ncols() != p {
        return Err(Error::Dimension { expected: format!("{p} data columns"), found: x.ncols().to_string() });
    }
    let n = x.nrows();
    if n < 2 * p {
        return Err(Error::InsufficientData { n, need: 2 * p });
    }
    let l_tilde = options.preliminary.fit(x)?;
    let mu = location_median(x, &l_tilde)?;
    let mut theta = ThetaParam::new(mu, l_tilde)?;
    if let Some(c) = options.discretize {
        theta = discretize(&theta, c, n)?;
    }
    let (cross_info, t) = estimate_cross_info_with_t(x, &theta, f, &options.line_search, options.execution)?;
    let l_hat = explicit_update(&theta.l, &t, &cross_info.gamma_hat, &cross_info.rho_hat, n)?;
    debug_assert!(l_hat.matrix().diagonal().iter().all(|&d| d == 1.0));
    let covariance_hat = covariance_estimate(&l_hat, f, &cross_info.gamma_hat, &cross_info.rho_hat, n)?;
    Ok(OneStepResult {
        l_hat,
        preliminary: options.preliminary.name(),
        l_tilde: theta.l,
        mu_hat: theta.mu,
        t,
        cross_info,
        covariance_hat,
        n,
    })
}

/// `Σ_{r≠s} (L̂_rs - L_rs)²`.
pub fn squared_error(l_hat: &Matrix, l: &Matrix) -> f64 {
    vecd_strip(&(l_hat - l)).norm_squared()
}

pub(crate) fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serializable view of a [`OneStepResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepRecord {
    pub n: usize,
    pub preliminary: String,
    pub l_hat: Vec<Vec<f64>>,
    pub l_tilde: Vec<Vec<f64>>,
    pub mu_hat: Vec<f64>,
    pub t: Vec<Vec<f64>>,
    pub gamma_hat: Vec<Vec<f64>>,
    pub rho_hat: Vec<Vec<f64>>,
    pub covariance_hat: Vec<Vec<f64>>,
    pub fallbacks: usize,
    pub traces: Vec<LineSearchTrace>,
}

impl OneStepResult {
    pub fn record(&self) -> OneStepRecord {
        OneStepRecord {
            n: self.n,
            preliminary: self.preliminary.to_string(),
            l_hat: matrix_rows(self.l_hat.matrix()),
            l_tilde: matrix_rows(self.l_tilde.matrix()),
            mu_hat: self.mu_hat.iter().copied().collect(),
            t: matrix_rows(&self.t),
            gamma_hat: matrix_rows(&self.cross_info.gamma_hat),
            rho_hat: matrix_rows(&self.cross_info.rho_hat),
            covariance_hat: matrix_rows(&self.covariance_hat),
            fallbacks: self.cross_info.fallback_count(),
            traces: self.cross_info.traces.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.record()).expect("record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_statistic_keeps_preliminary() {
        let l = MixingMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 1.0])).unwrap();
        let g = Matrix::from_row_slice(2, 2, &[0.0, 1.4, 0.9, 0.0]);
        let r = Matrix::from_row_slice(2, 2, &[0.0, 1.1, 0.8, 0.0]);
        let out = explicit_update(&l, &Matrix::zeros(2, 2), &g, &r, 100).unwrap();
        assert_eq!(out, l);
    }

    #[test]
    fn explicit_equals_definitional_example() {
        let l = MixingMatrix::new(Matrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.1, 1.0, 0.4, -0.5, 0.2, 1.0])).unwrap();
        let t = Matrix::from_row_slice(3, 3, &[0.0, 0.7, -1.2, 0.4, 0.0, 0.9, -0.3, 1.5, 0.0]);
        let g = Matrix::from_row_slice(3, 3, &[0.0, 1.4, 0.9, 0.8, 0.0, 1.3, 2.0, 0.7, 0.0]);
        let r = Matrix::from_row_slice(3, 3, &[0.0, 1.1, 0.8, 0.9, 0.0, 1.2, 0.95, 1.05, 0.0]);
        let a = explicit_update(&l, &t, &g, &r, 50).unwrap();
        let b = definitional_update(&l, &t, &g, &r, 50).unwrap();
        assert_relative_eq!(a.matrix(), b.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_pair_detected() {
        let ones = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(alpha_beta(&ones, &ones), Err(Error::DegeneratePair { r: 1, s: 2, .. })));
    }

    #[test]
    fn squared_error_examples() {
        let l = Matrix::identity(2, 2);
        assert_eq!(squared_error(&l, &l), 0.0);
        let d = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]);
        assert_relative_eq!(squared_error(&d, &l), 0.02, epsilon = 1e-15);
    }
}
