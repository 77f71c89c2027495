//! Information matrices, the signed-rank test of `L = L₀`, the
//! linear-hypothesis test, and asymptotic local power.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixing::{discretize, vecd_expand, vecd_strip, MixingMatrix, ThetaParam};
use crate::numerics::{
    chi2_quantile, chi2_sf, noncentral_chi2_cdf, pseudoinverse, rank, solve_spd, Matrix, Vector,
};
use crate::r_estimator::location_median;
use crate::scores::{cross_info_matrices, cross_info_matrices_at_target, ComponentDensities};
use crate::signed_ranks::efficient_central_sequence;

/// Where the `γ` and `ρ` coefficients of a [`GammaStarSpec`] come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Theoretical { f: ComponentDensities, g: ComponentDensities },
    Estimated,
}

/// Ingredients of `Γ*_{L,f,g}`: the mixing matrix and the coefficient
/// matrices `γ_rs`, `ρ_rs` (diagonals unused).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaStarSpec {
    pub l: MixingMatrix,
    pub gamma: Matrix,
    pub rho: Matrix,
    pub provenance: Provenance,
}

impl GammaStarSpec {
    /// `Γ*_{L,f}`: closed-form coefficients with `g = f`.
    pub fn at_target(l: MixingMatrix, f: &ComponentDensities) -> Result<Self> {
        check_dim(&l, f)?;
        let c = cross_info_matrices_at_target(f);
        Ok(Self { l, gamma: c.gamma, rho: c.rho, provenance: Provenance::Theoretical { f: f.clone(), g: f.clone() } })
    }

    /// `Γ*_{L,f,g}` with coefficients from quadrature.
    pub fn theoretical(l: MixingMatrix, f: &ComponentDensities, g: &ComponentDensities) -> Result<Self> {
        check_dim(&l, f)?;
        if f == g {
            return Self::at_target(l, f);
        }
        let c = cross_info_matrices(f, g)?;
        Ok(Self { l, gamma: c.gamma, rho: c.rho, provenance: Provenance::Theoretical { f: f.clone(), g: g.clone() } })
    }

    pub fn estimated(l: MixingMatrix, gamma: Matrix, rho: Matrix) -> Result<Self> {
        let p = l.dim();
        if gamma.shape() != (p, p) || rho.shape() != (p, p) {
            return Err(Error::Dimension { expected: format!("{p}x{p} coefficient matrices"), found: format!("{:?}, {:?}", gamma.shape(), rho.shape()) });
        }
        Ok(Self { l, gamma, rho, provenance: Provenance::Estimated })
    }

    /// `γ_rs γ_sr - ρ_rs ρ_sr` must stay away from zero for every pair;
    /// reports 1-based component indices.
    pub fn check_pairs(&self) -> Result<()> {
        let p = self.l.dim();
        for r in 0..p {
            for s in (r + 1)..p {
                let gg = self.gamma[(r, s)] * self.gamma[(s, r)];
                let rr = self.rho[(r, s)] * self.rho[(s, r)];
                let scale = gg.abs().max(rr.abs()).max(f64::MIN_POSITIVE);
                if !((gg - rr).abs() > 1e-8 * scale) {
                    return Err(Error::Identifiability { r: r + 1, s: s + 1 });
                }
            }
        }
        Ok(())
    }
}

fn check_dim(l: &MixingMatrix, f: &ComponentDensities) -> Result<()> {
    if l.dim() != f.dim() {
        return Err(Error::Dimension { expected: format!("{} densities", l.dim()), found: f.dim().to_string() });
    }
    Ok(())
}

/// `G(M)_ij = γ_ij M_ij + ρ_ji M_ji` off the diagonal, zero on it.
fn apply_g(gamma: &Matrix, rho: &Matrix, m: &Matrix) -> Matrix {
    let p = m.nrows();
    Matrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { gamma[(i, j)] * m[(i, j)] + rho[(j, i)] * m[(j, i)] })
}

/// `Γ* = C (I⊗L⁻¹)ᵀ G (I⊗L⁻¹) Cᵀ`, assembled one column at a time as
/// `vecd°(L⁻ᵀ G(L⁻¹ E_k))` with `E_k = vecd_expand(e_k)`.
pub fn build_gamma_star(spec: &GammaStarSpec) -> Matrix {
    let p = spec.l.dim();
    let d = p * (p - 1);
    let l_inv = spec.l.inverse();
    let l_inv_t = l_inv.transpose();
    let mut out = Matrix::zeros(d, d);
    for k in 0..d {
        let mut e = Vector::zeros(d);
        e[k] = 1.0;
        let ek = vecd_expand(&e).expect("length p(p-1)");
        let col = vecd_strip(&(&l_inv_t * apply_g(&spec.gamma, &spec.rho, &(l_inv * ek))));
        out.set_column(k, &col);
    }
    out
}

/// How the location is obtained before computing residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// `L₀ Med[L₀⁻¹X_i]`, componentwise medians.
    Median,
    Mean,
    Fixed(Vec<f64>),
}

impl Location {
    pub fn estimate(&self, x: &Matrix, l: &MixingMatrix) -> Result<Vector> {
        let p = l.dim();
        match self {
            Location::Median => location_median(x, l),
            Location::Mean => {
                if x.nrows() == 0 {
                    return Err(Error::InsufficientData { n: 0, need: 1 });
                }
                Ok(Vector::from_fn(p, |j, _| x.column(j).mean()))
            }
            Location::Fixed(mu) => {
                if mu.len() != p {
                    return Err(Error::Dimension { expected: format!("location of length {p}"), found: mu.len().to_string() });
                }
                Ok(Vector::from_column_slice(mu))
            }
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Location::Median => "median",
            Location::Mean => "mean",
            Location::Fixed(_) => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleTestOptions {
    pub location: Location,
    /// Grid constant for discretizing the estimated location; `None` is off.
    pub discretize: Option<f64>,
}

impl Default for SimpleTestOptions {
    fn default() -> Self {
        Self { location: Location::Median, discretize: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDiagnostics {
    pub location_method: String,
    pub location: Vec<f64>,
    pub zero_residuals: usize,
    /// `|trace - df|` for the linear test; zero for the simple test.
    pub df_rounding_gap: f64,
    pub df_trace: f64,
}

/// Outcome of a signed-rank test; `reject` is `statistic > critical_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub df: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub diagnostics: TestDiagnostics,
}

impl TestReport {
    fn from_statistic(statistic: f64, df: usize, alpha: f64, diagnostics: TestDiagnostics) -> Result<Self> {
        if df == 0 {
            return Ok(Self { statistic: 0.0, df, critical_value: 0.0, p_value: 1.0, reject: false, alpha, diagnostics });
        }
        let critical_value = chi2_quantile(df as f64, 1.0 - alpha)?;
        let p_value = chi2_sf(statistic, df as f64).clamp(0.0, 1.0);
        Ok(Self { statistic, df, critical_value, p_value, reject: statistic > critical_value, alpha, diagnostics })
    }

    /// Decision at another level from the stored p-value.
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `Q = Δ*ᵀ (Γ*_{L₀,f})⁻¹ Δ*` at `(μ̂, L₀)`, compared with `χ²_{p(p-1), 1-α}`.
pub fn test_simple(
    x: &Matrix,
    l0: &MixingMatrix,
    f: &ComponentDensities,
    alpha: f64,
    options: &SimpleTestOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_dim(l0, f)?;
    let p = l0.dim();
    let d = p * (p - 1);
    if x.ncols() != p {
        return Err(Error::Dimension { expected: format!("{p} data columns"), found: x.ncols().to_string() });
    }
    if x.nrows() < d.max(2) {
        return Err(Error::InsufficientData { n: x.nrows(), need: d.max(2) });
    }
    let mu = options.location.estimate(x, l0)?;
    let mut theta = ThetaParam::new(mu, l0.clone())?;
    if let Some(c) = options.discretize {
        let snapped = discretize(&theta, c, x.nrows())?;
        theta.mu = snapped.mu;
    }
    let spec = GammaStarSpec::at_target(l0.clone(), f)?;
    spec.check_pairs()?;
    let gamma = build_gamma_star(&spec);
    let cs = efficient_central_sequence(&theta, f, x)?;
    let q = cs.delta.dot(&solve_spd(&gamma, &cs.delta)?);
    let diagnostics = TestDiagnostics {
        location_method: options.location.label().into(),
        location: theta.mu.iter().copied().collect(),
        zero_residuals: cs.zero_residuals,
        df_rounding_gap: 0.0,
        df_trace: d as f64,
    };
    TestReport::from_statistic(q.max(0.0), d, alpha, diagnostics)
}

/// `vecd°(L - L₀) ∈ span(Ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHypothesis {
    l0: MixingMatrix,
    omega: Matrix,
}

impl LinearHypothesis {
    pub fn new(l0: MixingMatrix, omega: Matrix) -> Result<Self> {
        let p = l0.dim();
        let d = p * (p - 1);
        if omega.nrows() != d {
            return Err(Error::Dimension { expected: format!("Omega with {d} rows"), found: omega.nrows().to_string() });
        }
        let r = rank(&omega);
        if r < omega.ncols() {
            return Err(Error::RankDeficient { rank: r, cols: omega.ncols() });
        }
        Ok(Self { l0, omega })
    }

    pub fn l0(&self) -> &MixingMatrix {
        &self.l0
    }

    pub fn omega(&self) -> &Matrix {
        &self.omega
    }

    fn projector(&self) -> Matrix {
        &self.omega * pseudoinverse(&self.omega)
    }

    /// Distance of `vecd°(L - L₀)` from `span(Ω)`.
    pub fn violation(&self, l: &MixingMatrix) -> f64 {
        let v = vecd_strip(&(l.matrix() - self.l0.matrix()));
        (&v - self.projector() * &v).norm()
    }

    /// Orthogonal projection of `L` onto the affine null set.
    pub fn project(&self, l: &MixingMatrix) -> Result<MixingMatrix> {
        let v = vecd_strip(&(l.matrix() - self.l0.matrix()));
        let h = vecd_expand(&(self.projector() * v))?;
        MixingMatrix::new(self.l0.matrix() + h)
    }

    /// Constrained estimate from an unconstrained `L̂`: project, then take
    /// the median location under the projected matrix.
    pub fn constrained_estimate(&self, x: &Matrix, unconstrained: &MixingMatrix) -> Result<ThetaParam> {
        let l = self.project(unconstrained)?;
        let mu = location_median(x, &l)?;
        ThetaParam::new(mu, l)
    }
}

/// `Q = Δ*ᵀ P_Ω Δ*` with `P_Ω = Γ⁻ - Ω(ΩᵀΓΩ)⁻Ωᵀ`, `Γ = Γ*_{L̂,f}`, and
/// degrees of freedom `tr(P_Ω Γ)` rounded to an integer.
pub fn test_linear(
    x: &Matrix,
    hyp: &LinearHypothesis,
    f: &ComponentDensities,
    alpha: f64,
    constrained: &ThetaParam,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_dim(&hyp.l0, f)?;
    if constrained.dim() != hyp.l0.dim() {
        return Err(Error::Dimension { expected: format!("p = {}", hyp.l0.dim()), found: constrained.dim().to_string() });
    }
    let violation = hyp.violation(&constrained.l);
    let scale = vecd_strip(&(constrained.l.matrix() - hyp.l0.matrix())).norm().max(1.0);
    if violation > 1e-8 * scale {
        return Err(Error::ConstraintViolation(violation));
    }
    let spec = GammaStarSpec::at_target(constrained.l.clone(), f)?;
    let gamma = build_gamma_star(&spec);
    let omega = &hyp.omega;
    let inner = omega.transpose() * &gamma * omega;
    let proj = pseudoinverse(&gamma) - omega * pseudoinverse(&inner) * omega.transpose();
    let trace = (&proj * &gamma).trace();
    let df = trace.round().max(0.0) as usize;
    let cs = efficient_central_sequence(constrained, f, x)?;
    let q = cs.delta.dot(&(&proj * &cs.delta));
    let diagnostics = TestDiagnostics {
        location_method: "constrained".into(),
        location: constrained.mu.iter().copied().collect(),
        zero_residuals: cs.zero_residuals,
        df_rounding_gap: (trace - df as f64).abs(),
        df_trace: trace,
    };
    TestReport::from_statistic(q.max(0.0), df, alpha, diagnostics)
}

/// Asymptotic power of the simple test against `L = L₀ + n^{-1/2} H` under
/// `g`: noncentrality `τᵀ Γ_fgᵀ Γ_f⁻¹ Γ_fg τ` with `τ = vecd° H`.
pub fn local_power(
    l0: &MixingMatrix,
    h: &Matrix,
    f: &ComponentDensities,
    g: &ComponentDensities,
    alpha: f64,
) -> Result<f64> {
    let spec_fg = GammaStarSpec::theoretical(l0.clone(), f, g)?;
    local_power_with(l0, h, f, &spec_fg, alpha)
}

/// [`local_power`] with a precomputed `Γ*_{L₀,f,g}` specification.
pub fn local_power_with(
    l0: &MixingMatrix,
    h: &Matrix,
    f: &ComponentDensities,
    spec_fg: &GammaStarSpec,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let p = l0.dim();
    if h.shape() != (p, p) {
        return Err(Error::Dimension { expected: format!("{p}x{p} direction"), found: format!("{:?}", h.shape()) });
    }
    let spec_f = GammaStarSpec::at_target(l0.clone(), f)?;
    spec_f.check_pairs()?;
    let gamma_f = build_gamma_star(&spec_f);
    let gamma_fg = build_gamma_star(spec_fg);
    let tau = vecd_strip(h);
    let shift = &gamma_fg * &tau;
    let delta = shift.dot(&solve_spd(&gamma_f, &shift)?).max(0.0);
    let df = (p * (p - 1)) as f64;
    let crit = chi2_quantile(df, 1.0 - alpha)?;
    Ok((1.0 - noncentral_chi2_cdf(crit, df, delta)?).clamp(0.0, 1.0))
}
