//! Symmetric component densities, their location scores and distribution
//! functionals, and the cross-information coefficients coupling a target
//! density `f` with the true density `g`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    beta_inc, beta_inc_inv, erfc, integrate_unit_interval_with, ln_gamma, Matrix,
    QuadratureRule, std_normal_quantile,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityFamily {
    Gaussian,
    Logistic,
    StudentT { nu: f64 },
}

/// A univariate density symmetric about zero, `f(z/scale)/scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricDensity {
    family: DensityFamily,
    scale: f64,
}

impl SymmetricDensity {
    pub fn gaussian() -> Self {
        Self { family: DensityFamily::Gaussian, scale: 1.0 }
    }

    pub fn logistic() -> Self {
        Self { family: DensityFamily::Logistic, scale: 1.0 }
    }

    /// Student t with `nu > 2` degrees of freedom (finite variance).
    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(domain(format!(
                "Student t requires nu > 2 for a finite second moment, got {nu}"
            )));
        }
        Ok(Self { family: DensityFamily::StudentT { nu }, scale: 1.0 })
    }

    pub fn with_scale(self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { scale, ..self })
    }

    pub fn family(&self) -> DensityFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, DensityFamily::Gaussian)
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        let s = self.scale;
        let x = z / s;
        match self.family {
            DensityFamily::Gaussian => -0.5 * x * x - 0.5 * (2.0 * PI).ln() - s.ln(),
            DensityFamily::Logistic => {
                let a = x.abs();
                -a - 2.0 * (-a).exp().ln_1p() - s.ln()
            }
            DensityFamily::StudentT { nu } => {
                ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
                    - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
                    - s.ln()
            }
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.log_pdf(z).exp()
    }

    /// Location score `-f'(z)/f(z)`.
    pub fn location_score(&self, z: f64) -> f64 {
        let s = self.scale;
        match self.family {
            DensityFamily::Gaussian => z / (s * s),
            DensityFamily::Logistic => (0.5 * z / s).tanh() / s,
            DensityFamily::StudentT { nu } => (nu + 1.0) * z / (nu * s * s + z * z),
        }
    }

    /// `P[|Z| < t]` and its complement, each computed without cancellation.
    fn abs_cdf_pair(&self, t: f64) -> (f64, f64) {
        let x = t / self.scale;
        match self.family {
            DensityFamily::Gaussian => {
                let c = erfc(x.abs() * std::f64::consts::FRAC_1_SQRT_2);
                (1.0 - c, c)
            }
            DensityFamily::Logistic => {
                let e = (-x).exp();
                ((1.0 - e) / (1.0 + e), 2.0 * e / (1.0 + e))
            }
            DensityFamily::StudentT { nu } => {
                let d = nu + x * x;
                (beta_inc(0.5, 0.5 * nu, x * x / d), beta_inc(0.5 * nu, 0.5, nu / d))
            }
        }
    }

    /// `F₊(t) = P[|Z| < t]`.
    pub fn abs_cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("abs_cdf requires t >= 0, got {t}")));
        }
        Ok(self.abs_cdf_pair(t).0)
    }

    /// `1 - F₊(t)`.
    pub fn abs_sf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("abs_sf requires t >= 0, got {t}")));
        }
        Ok(self.abs_cdf_pair(t).1)
    }

    /// Inverse of `F₊` given `v` and its complement `w = 1 - v`.
    pub(crate) fn abs_quantile_pair(&self, v: f64, w: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if w <= 0.0 {
            return f64::INFINITY;
        }
        let x = match self.family {
            DensityFamily::Gaussian => {
                if v <= 0.5 {
                    std_normal_quantile(0.5 + 0.5 * v).unwrap_or(0.0)
                } else {
                    -std_normal_quantile(0.5 * w).unwrap_or(f64::NEG_INFINITY)
                }
            }
            DensityFamily::Logistic => v.ln_1p() - w.ln(),
            DensityFamily::StudentT { nu } => {
                if v <= 0.5 {
                    let y = beta_inc_inv(0.5, 0.5 * nu, v);
                    (nu * y / (1.0 - y)).sqrt()
                } else {
                    let z = beta_inc_inv(0.5 * nu, 0.5, w);
                    (nu * (1.0 - z) / z).sqrt()
                }
            }
        };
        x * self.scale
    }

    /// `F₊⁻¹(u)` for `0 <= u < 1`.
    pub fn abs_quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(domain(format!("abs_quantile requires 0 <= u < 1, got {u}")));
        }
        Ok(self.abs_quantile_pair(u, 1.0 - u))
    }

    /// Full-line quantile `F⁻¹(u)` from `u` and `1 - u`, extended from
    /// [`Self::abs_quantile`] by symmetry.
    pub fn quantile_pair(&self, u: f64, complement: f64) -> f64 {
        if u < 0.5 {
            -self.abs_quantile_pair(1.0 - 2.0 * u, 2.0 * u)
        } else {
            self.abs_quantile_pair(2.0 * u - 1.0, 2.0 * complement)
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(domain(format!("quantile requires 0 < u < 1, got {u}")));
        }
        Ok(self.quantile_pair(u, 1.0 - u))
    }

    /// Fisher information for location, `I_f = ∫ φ² f`.
    pub fn info_location(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.family {
            DensityFamily::Gaussian => 1.0 / s2,
            DensityFamily::Logistic => 1.0 / (3.0 * s2),
            DensityFamily::StudentT { nu } => (nu + 1.0) / ((nu + 3.0) * s2),
        }
    }

    /// `σ²_f = ∫ y² f`.
    pub fn second_moment(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.family {
            DensityFamily::Gaussian => s2,
            DensityFamily::Logistic => PI * PI * s2 / 3.0,
            DensityFamily::StudentT { nu } => s2 * nu / (nu - 2.0),
        }
    }

    /// Scale information `J_f = ∫ y² φ² f` (scale free).
    pub fn info_scale(&self) -> f64 {
        match self.family {
            DensityFamily::Gaussian => 3.0,
            DensityFamily::Logistic => (PI * PI + 12.0) / 9.0,
            DensityFamily::StudentT { nu } => 3.0 * (nu + 1.0) / (nu + 3.0),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match self.family {
            DensityFamily::Gaussian => rng.sample::<f64, _>(StandardNormal),
            DensityFamily::Logistic => {
                let u: f64 = rng.random();
                // u in [0,1); reject the measure-zero endpoint
                let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
                (u / (1.0 - u)).ln()
            }
            DensityFamily::StudentT { nu } => {
                let z: f64 = rng.sample(StandardNormal);
                let chi = ChiSquared::new(nu).expect("nu > 2").sample(rng);
                z / (chi / nu).sqrt()
            }
        };
        x * self.scale
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

impl fmt::Display for SymmetricDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            DensityFamily::Gaussian => write!(f, "gaussian")?,
            DensityFamily::Logistic => write!(f, "logistic")?,
            DensityFamily::StudentT { nu } => write!(f, "t:{nu}")?,
        }
        if self.scale != 1.0 {
            write!(f, ":{}", self.scale)?;
        }
        Ok(())
    }
}

fn parse_positive(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| domain(format!("invalid {what} '{s}'")))
}

impl FromStr for SymmetricDensity {
    type Err = Error;

    /// `gaussian`, `logistic[:scale]`, `t:<nu>[:scale]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let name = parts[0].trim().to_ascii_lowercase();
        match (name.as_str(), parts.len()) {
            ("gaussian" | "normal", 1) => Ok(Self::gaussian()),
            ("gaussian" | "normal", 2) => Self::gaussian().with_scale(parse_positive(parts[1], "scale")?),
            ("logistic", 1) => Ok(Self::logistic()),
            ("logistic", 2) => Self::logistic().with_scale(parse_positive(parts[1], "scale")?),
            ("t", 2) => Self::student_t(parse_positive(parts[1], "degrees of freedom")?),
            ("t", 3) => Self::student_t(parse_positive(parts[1], "degrees of freedom")?)?
                .with_scale(parse_positive(parts[2], "scale")?),
            _ => Err(domain(format!(
                "unknown density '{s}' (expected gaussian, logistic[:scale] or t:<nu>[:scale])"
            ))),
        }
    }
}

/// One symmetric density per independent component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDensities(Vec<SymmetricDensity>);

impl ComponentDensities {
    pub fn new(components: Vec<SymmetricDensity>) -> Result<Self> {
        if components.len() < 2 {
            return Err(domain(format!("need at least 2 components, got {}", components.len())));
        }
        Ok(Self(components))
    }

    /// Same density for all `p` components.
    pub fn repeated(d: SymmetricDensity, p: usize) -> Result<Self> {
        Self::new(vec![d; p])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[SymmetricDensity] {
        &self.0
    }

    pub fn get(&self, r: usize) -> &SymmetricDensity {
        &self.0[r]
    }

    pub fn gaussian_count(&self) -> usize {
        self.0.iter().filter(|d| d.is_gaussian()).count()
    }

    /// Identifiability check for a data-generating density: at most one
    /// Gaussian marginal.
    pub fn validate_generating(&self) -> Result<()> {
        if self.gaussian_count() > 1 {
            return Err(domain(format!(
                "generating density '{self}' has {} Gaussian components (at most one allowed)",
                self.gaussian_count()
            )));
        }
        Ok(())
    }

    /// Each component rescaled by the matching factor.
    pub fn rescaled(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.dim() {
            return Err(Error::Dimension {
                expected: format!("{} scales", self.dim()),
                found: scales.len().to_string(),
            });
        }
        let comps = self
            .0
            .iter()
            .zip(scales)
            .map(|(d, &s)| d.with_scale(d.scale() * s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// `γ_rs(f) = I_{f_r} σ²_{f_s}` (off-diagonal; diagonal zero).
    pub fn gamma_matrix(&self) -> Matrix {
        let p = self.dim();
        Matrix::from_fn(p, p, |r, s| {
            if r == s {
                0.0
            } else {
                self.0[r].info_location() * self.0[s].second_moment()
            }
        })
    }
}

impl fmt::Display for ComponentDensities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ComponentDensities {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let comps = s
            .split(',')
            .map(|c| c.parse::<SymmetricDensity>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }
}

/// A cross-information integral together with its quadrature status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossInfoValue {
    pub value: f64,
    pub converged: bool,
}

fn product_integral(a: impl Fn(f64, f64) -> f64, b: impl Fn(f64, f64) -> f64) -> CrossInfoValue {
    let rule = QuadratureRule::default();
    let r = integrate_unit_interval_with(|p| a(p.u, p.complement) * b(p.u, p.complement), &rule);
    CrossInfoValue { value: r.value, converged: r.converged }
}

fn score_at_quantile(d: SymmetricDensity) -> impl Fn(f64, f64) -> f64 {
    move |u, c| d.location_score(d.quantile_pair(u, c))
}

fn quantile_fn(d: SymmetricDensity) -> impl Fn(f64, f64) -> f64 {
    move |u, c| d.quantile_pair(u, c)
}

/// `γ_rs(f,g) = ∫ φ_{f_r}(F_r⁻¹) φ_{g_r}(G_r⁻¹) × ∫ F_s⁻¹ G_s⁻¹`.
pub fn cross_info_gamma(
    f_r: &SymmetricDensity,
    g_r: &SymmetricDensity,
    f_s: &SymmetricDensity,
    g_s: &SymmetricDensity,
) -> CrossInfoValue {
    let first = product_integral(score_at_quantile(*f_r), score_at_quantile(*g_r));
    let second = product_integral(quantile_fn(*f_s), quantile_fn(*g_s));
    CrossInfoValue {
        value: first.value * second.value,
        converged: first.converged && second.converged,
    }
}

/// `ρ_rs(f,g) = ∫ F_r⁻¹ φ_{g_r}(G_r⁻¹) × ∫ φ_{f_s}(F_s⁻¹) G_s⁻¹`.
pub fn cross_info_rho(
    f_r: &SymmetricDensity,
    g_r: &SymmetricDensity,
    f_s: &SymmetricDensity,
    g_s: &SymmetricDensity,
) -> CrossInfoValue {
    let first = product_integral(quantile_fn(*f_r), score_at_quantile(*g_r));
    let second = product_integral(score_at_quantile(*f_s), quantile_fn(*g_s));
    CrossInfoValue {
        value: first.value * second.value,
        converged: first.converged && second.converged,
    }
}

/// Matrices of `γ_rs(f,g)` and `ρ_rs(f,g)` (zero diagonals).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossInfoMatrices {
    pub gamma: Matrix,
    pub rho: Matrix,
    pub converged: bool,
}

pub fn cross_info_matrices(f: &ComponentDensities, g: &ComponentDensities) -> Result<CrossInfoMatrices> {
    let p = f.dim();
    if g.dim() != p {
        return Err(Error::Dimension { expected: format!("{p} components"), found: g.dim().to_string() });
    }
    let mut gamma = Matrix::zeros(p, p);
    let mut rho = Matrix::zeros(p, p);
    let mut converged = true;
    for r in 0..p {
        for s in 0..p {
            if r == s {
                continue;
            }
            let gv = cross_info_gamma(f.get(r), g.get(r), f.get(s), g.get(s));
            let rv = cross_info_rho(f.get(r), g.get(r), f.get(s), g.get(s));
            gamma[(r, s)] = gv.value;
            rho[(r, s)] = rv.value;
            converged &= gv.converged && rv.converged;
        }
    }
    Ok(CrossInfoMatrices { gamma, rho, converged })
}

/// Closed-form coefficients at `g = f`: `γ_rs(f) = I_{f_r}σ²_{f_s}`, `ρ_rs = 1`.
pub fn cross_info_matrices_at_target(f: &ComponentDensities) -> CrossInfoMatrices {
    let p = f.dim();
    let rho = Matrix::from_fn(p, p, |r, s| if r == s { 0.0 } else { 1.0 });
    CrossInfoMatrices { gamma: f.gamma_matrix(), rho, converged: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(nu: f64) -> SymmetricDensity {
        SymmetricDensity::student_t(nu).unwrap()
    }

    #[test]
    fn pdf_examples() {
        assert_abs_diff_eq!(SymmetricDensity::gaussian().pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-12);
        assert_abs_diff_eq!(SymmetricDensity::logistic().pdf(0.0), 0.25, epsilon = 1e-14);
        for d in [SymmetricDensity::gaussian(), SymmetricDensity::logistic(), t(5.0)] {
            for z in [0.3, 1.7, 9.0] {
                assert_eq!(d.pdf(z), d.pdf(-z));
            }
        }
    }

    #[test]
    fn score_examples() {
        assert_abs_diff_eq!(SymmetricDensity::gaussian().location_score(1.7), 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(t(5.0).location_score(1.0), 1.0, epsilon = 1e-15);
        assert_eq!(SymmetricDensity::logistic().location_score(0.0), 0.0);
    }

    #[test]
    fn abs_cdf_examples() {
        let g = SymmetricDensity::gaussian();
        assert_eq!(g.abs_cdf(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(g.abs_cdf(1.959_963_984_540_054).unwrap(), 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(SymmetricDensity::logistic().abs_cdf(3f64.ln()).unwrap(), 0.5, epsilon = 1e-14);
        assert!(g.abs_cdf(-1.0).is_err());
    }

    #[test]
    fn abs_quantile_examples() {
        let l = SymmetricDensity::logistic();
        assert_eq!(l.abs_quantile(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(l.abs_quantile(0.5).unwrap(), 3f64.ln(), epsilon = 1e-14);
        assert!(l.abs_quantile(1.0).is_err());
        for d in [SymmetricDensity::gaussian(), l, t(5.0), t(8.0), t(2.5)] {
            for k in 1..200 {
                let u = k as f64 / 200.0;
                let back = d.abs_cdf(d.abs_quantile(u).unwrap()).unwrap();
                assert!((back - u).abs() <= 1e-12, "{d} u={u} back={back}");
            }
        }
    }

    #[test]
    fn student_t_rejects_heavy_tails() {
        assert!(SymmetricDensity::student_t(2.0).is_err());
        assert!(SymmetricDensity::student_t(1.5).is_err());
        assert!("t:2".parse::<SymmetricDensity>().is_err());
    }

    #[test]
    fn information_examples() {
        let g = SymmetricDensity::gaussian();
        assert_eq!((g.info_location(), g.second_moment(), g.info_scale()), (1.0, 1.0, 3.0));
        assert_abs_diff_eq!(t(5.0).info_location(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(t(5.0).second_moment(), 5.0 / 3.0, epsilon = 1e-15);
        let l = SymmetricDensity::logistic();
        assert_abs_diff_eq!(l.info_location(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.second_moment(), PI * PI / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn grammar_round_trip() {
        let v: ComponentDensities = "t:8,t:5".parse().unwrap();
        assert_eq!(v.components(), &[t(8.0), t(5.0)]);
        assert_eq!(v.to_string(), "t:8,t:5");
        let w: ComponentDensities = "gaussian, logistic:2, t:5:0.5".parse().unwrap();
        assert_eq!(w.get(1).scale(), 2.0);
        assert_eq!(w.to_string().parse::<ComponentDensities>().unwrap(), w);
        assert!("gaussian".parse::<ComponentDensities>().is_err());
        assert!("cauchy,t:5".parse::<ComponentDensities>().is_err());
    }

    #[test]
    fn two_gaussians_not_identifiable() {
        let v: ComponentDensities = "gaussian,gaussian".parse().unwrap();
        assert!(v.validate_generating().is_err());
        let ok: ComponentDensities = "gaussian,t:5".parse().unwrap();
        assert!(ok.validate_generating().is_ok());
    }

    #[test]
    fn cross_info_examples() {
        let g = SymmetricDensity::gaussian();
        assert_abs_diff_eq!(cross_info_gamma(&g, &g, &g, &g).value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cross_info_gamma(&t(5.0), &t(5.0), &t(5.0), &t(5.0)).value, 1.25, epsilon = 1e-8);
        let (f1, f2, g1, g2) = (t(8.0), t(5.0), g, t(5.0));
        let g12 = cross_info_gamma(&f1, &g1, &f2, &g2);
        assert!(g12.converged);
        assert_abs_diff_eq!(g12.value, 1.478, epsilon = 5e-4);
        assert_abs_diff_eq!(cross_info_rho(&f1, &g1, &f2, &g2).value, 1.149, epsilon = 5e-4);
        assert_abs_diff_eq!(cross_info_rho(&f2, &g2, &f1, &g1).value, 0.887, epsilon = 5e-4);
        assert_abs_diff_eq!(cross_info_gamma(&f2, &g2, &f1, &g1).value, 0.862, epsilon = 5e-4);
    }
}
