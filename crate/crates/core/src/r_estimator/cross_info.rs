//! Rank-based estimation of the cross-information coefficients `γ_rs(f,g)`
//! and `ρ_rs(f,g)` by locating the zero crossing of `h(λ)` on a grid.
//!
//! `h(λ)` is asymptotically `(1 - λγ) h(0)`, so its root is the reciprocal
//! of the coefficient. The root is bracketed on `λ_j = j/c` and refined by
//! linear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixing::{perturb_for_line_search, residuals, Flavor, ThetaParam};
use crate::numerics::Matrix;
use crate::par::Execution;
use crate::scores::ComponentDensities;
use crate::signed_ranks::{rank_score_matrix, signed_rank_dot, ScoreTables, SignedRankTable};

/// Grid constant and search cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchOptions {
    pub c: f64,
    pub lambda_max: f64,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self { c: 100.0, lambda_max: 20.0 }
    }
}

impl LineSearchOptions {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(domain(format!("grid constant c must be positive, got {}", self.c)));
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return Err(domain(format!("lambda_max must be positive, got {}", self.lambda_max)));
        }
        Ok(())
    }
}

/// Record of one line search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSearchTrace {
    /// 0-based component indices.
    pub r: usize,
    pub s: usize,
    pub flavor: Flavor,
    pub lambdas: Vec<f64>,
    pub h: Vec<f64>,
    /// `[λ⁻, λ⁺]` around the first sign change.
    pub bracket: Option<(f64, f64)>,
    pub root: f64,
    pub estimate: f64,
    /// No crossing below `lambda_max`; the estimate is `1/lambda_max`.
    pub fallback: bool,
    /// The walk stopped at a numerically singular perturbation.
    pub singular_boundary: bool,
}

/// Walk `λ_j = j/c` from `h(0)` until `h(λ_{j+1}) < 0`, then interpolate.
/// `h` returns `None` where the perturbed parameter is singular; the walk
/// stops there as if at `lambda_max`.
pub fn line_search_root(
    mut h: impl FnMut(f64) -> Option<f64>,
    h0: f64,
    options: &LineSearchOptions,
) -> Result<(Vec<f64>, Vec<f64>, Option<(f64, f64)>, f64, bool)> {
    options.validate()?;
    let mut lambdas = vec![0.0];
    let mut values = vec![h0];
    let mut j = 0u64;
    let mut singular = false;
    loop {
        let lo = j as f64 / options.c;
        let hi = (j + 1) as f64 / options.c;
        if hi > options.lambda_max {
            return Ok((lambdas, values, None, options.lambda_max, singular));
        }
        let Some(h_hi) = h(hi) else {
            singular = true;
            return Ok((lambdas, values, None, options.lambda_max, singular));
        };
        lambdas.push(hi);
        values.push(h_hi);
        if h_hi < 0.0 {
            let h_lo = values[values.len() - 2];
            let root = lo + (hi - lo) * h_lo / (h_lo - h_hi);
            return Ok((lambdas, values, Some((lo, hi)), root, singular));
        }
        j += 1;
    }
}

/// `γ̂`, `ρ̂` and the line-search traces (`gamma_hat[(r,s)]` estimates `γ_rs`).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossInfoEstimates {
    pub gamma_hat: Matrix,
    pub rho_hat: Matrix,
    pub traces: Vec<LineSearchTrace>,
}

impl CrossInfoEstimates {
    pub fn fallback_count(&self) -> usize {
        self.traces.iter().filter(|t| t.fallback).count()
    }
}

/// Data-dependent state shared by every `h(λ)` evaluation.
struct LineSearchContext<'a> {
    theta: &'a ThetaParam,
    z: Matrix,
    t: Matrix,
    scores: ScoreTables,
    n: usize,
}

impl<'a> LineSearchContext<'a> {
    fn new(x: &Matrix, theta: &'a ThetaParam, f: &ComponentDensities) -> Result<Self> {
        if f.dim() != theta.dim() {
            return Err(Error::Dimension { expected: format!("{} target densities", theta.dim()), found: f.dim().to_string() });
        }
        let z = residuals(theta, x)?;
        let table = SignedRankTable::compute(&z)?;
        let scores = ScoreTables::new(f, table.n());
        let t = rank_score_matrix(&table, &scores)?;
        Ok(Self { theta, n: z.nrows(), z, t, scores })
    }

    /// Signed score or quantile of the unperturbed column `s`: the column
    /// paired with the perturbed column `r` in the statistic.
    fn fixed_column(&self, s: usize, flavor: Flavor) -> Vec<f64> {
        let col = self.z.column(s);
        let mut one = Matrix::zeros(self.n, 1);
        one.set_column(0, &col);
        let table = SignedRankTable::compute(&one).expect("n >= 2");
        let lookup = match flavor {
            Flavor::Gamma => &self.scores.component(s).quantiles,
            Flavor::Rho => &self.scores.component(s).scores,
        };
        (0..self.n)
            .map(|i| f64::from(table.signs(0)[i]) * lookup[table.ranks(0)[i] as usize - 1])
            .collect()
    }

    /// `T_rs` (gamma) or `T_sr` (rho) at the perturbed parameter, or `None`
    /// when the perturbation is singular. Column `s` of the residuals is
    /// only rescaled by the perturbation, so its ranks are reused and only
    /// column `r` is re-ranked.
    fn statistic_at(
        &self,
        r: usize,
        s: usize,
        lambda: f64,
        flavor: Flavor,
        fixed: &[f64],
        scratch: &mut (Vec<f64>, Vec<(f64, u32)>),
    ) -> Option<f64> {
        let coef = self.base_statistic(r, s, flavor);
        let epsilon = lambda * coef / (self.n as f64).sqrt();
        let denom = 1.0 - epsilon * self.theta.l.matrix()[(s, r)];
        if !(denom.abs() > 1e-12) {
            return None;
        }
        let (zr, keys) = scratch;
        zr.clear();
        zr.extend(self.z.column(r).iter().zip(self.z.column(s).iter()).map(|(a, b)| a - epsilon * b / denom));
        let table = match flavor {
            Flavor::Gamma => &self.scores.component(r).scores,
            Flavor::Rho => &self.scores.component(r).quantiles,
        };
        let sum = signed_rank_dot(zr, table, fixed, keys);
        Some(denom.signum() * sum / (self.n as f64).sqrt())
    }

    fn base_statistic(&self, r: usize, s: usize, flavor: Flavor) -> f64 {
        match flavor {
            Flavor::Gamma => self.t[(r, s)],
            Flavor::Rho => self.t[(s, r)],
        }
    }

    fn search(&self, r: usize, s: usize, flavor: Flavor, options: &LineSearchOptions) -> Result<LineSearchTrace> {
        let t0 = self.base_statistic(r, s, flavor);
        if !(t0.abs() >= 1e-10) {
            let (a, b) = if flavor == Flavor::Gamma { (r, s) } else { (s, r) };
            return Err(Error::DegenerateStatistic { r: a + 1, s: b + 1, value: t0 });
        }
        let fixed = self.fixed_column(s, flavor);
        let mut scratch = (Vec::with_capacity(self.n), Vec::with_capacity(self.n));
        let (lambdas, h, bracket, root, singular_boundary) = line_search_root(
            |lam| self.statistic_at(r, s, lam, flavor, &fixed, &mut scratch).map(|tl| t0 * tl),
            t0 * t0,
            options,
        )?;
        let fallback = bracket.is_none();
        Ok(LineSearchTrace {
            r,
            s,
            flavor,
            lambdas,
            h,
            bracket,
            root,
            estimate: 1.0 / root,
            fallback,
            singular_boundary,
        })
    }
}

/// `h(λ) = T(θ̃) T(θ̃_λ)` for a single `λ`, recomputed from scratch.
pub fn h_lambda(
    x: &Matrix,
    theta: &ThetaParam,
    f: &ComponentDensities,
    r: usize,
    s: usize,
    lambda: f64,
    flavor: Flavor,
) -> Result<f64> {
    let ctx = LineSearchContext::new(x, theta, f)?;
    let pert = perturb_for_line_search(theta, &ctx.t, r, s, lambda, flavor, ctx.n)?;
    let z = residuals(&pert.theta(), x)?;
    let t_lambda = rank_score_matrix(&SignedRankTable::compute(&z)?, &ctx.scores)?;
    Ok(match flavor {
        Flavor::Gamma => ctx.t[(r, s)] * t_lambda[(r, s)],
        Flavor::Rho => ctx.t[(s, r)] * t_lambda[(s, r)],
    })
}

/// Line searches for every ordered pair `r ≠ s` and both flavors.
pub fn estimate_cross_info(
    x: &Matrix,
    theta: &ThetaParam,
    f: &ComponentDensities,
    options: &LineSearchOptions,
    execution: Execution,
) -> Result<CrossInfoEstimates> {
    options.validate()?;
    let ctx = LineSearchContext::new(x, theta, f)?;
    estimate_with_context(&ctx, options, execution)
}

fn estimate_with_context(
    ctx: &LineSearchContext<'_>,
    options: &LineSearchOptions,
    execution: Execution,
) -> Result<CrossInfoEstimates> {
    let p = ctx.theta.dim();
    let jobs: Vec<(usize, usize, Flavor)> = (0..p)
        .flat_map(|r| (0..p).filter(move |&s| s != r).map(move |s| (r, s)))
        .flat_map(|(r, s)| [(r, s, Flavor::Gamma), (r, s, Flavor::Rho)])
        .collect();
    let traces = execution
        .map(jobs.len(), |k| {
            let (r, s, flavor) = jobs[k];
            ctx.search(r, s, flavor, options)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut gamma_hat = Matrix::zeros(p, p);
    let mut rho_hat = Matrix::zeros(p, p);
    for tr in &traces {
        match tr.flavor {
            Flavor::Gamma => gamma_hat[(tr.r, tr.s)] = tr.estimate,
            Flavor::Rho => rho_hat[(tr.r, tr.s)] = tr.estimate,
        }
    }
    Ok(CrossInfoEstimates { gamma_hat, rho_hat, traces })
}

/// Cross-information estimates together with `T` at `θ̃`.
pub(crate) fn estimate_cross_info_with_t(
    x: &Matrix,
    theta: &ThetaParam,
    f: &ComponentDensities,
    options: &LineSearchOptions,
    execution: Execution,
) -> Result<(CrossInfoEstimates, Matrix)> {
    options.validate()?;
    let ctx = LineSearchContext::new(x, theta, f)?;
    let est = estimate_with_context(&ctx, options, execution)?;
    Ok((est, ctx.t))
}
