//! Parametrization of the symmetric IC model `X = L Z + μ`.
//!
//! The mixing matrix is normalized to unit diagonal, so only its `p(p-1)`
//! off-diagonal entries are free. They are stacked column by column with the
//! diagonal removed (`vecd°`). The selector matrix `C` with
//! `vecd° A = C vec A` is never stored; [`vecd_strip`] and [`vecd_expand`]
//! realize `C` and `Cᵀ` as gather/scatter.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{Matrix, Vector};

/// Column-major vectorization with the diagonal removed.
pub fn vecd_strip(a: &Matrix) -> Vector {
    let p = a.nrows();
    debug_assert_eq!(p, a.ncols());
    let mut out = Vector::zeros(p * p.saturating_sub(1));
    let mut k = 0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                out[k] = a[(i, j)];
                k += 1;
            }
        }
    }
    out
}

/// Dimension `p` with `p(p-1) = len`, if any.
pub fn dim_from_vecd_len(len: usize) -> Option<usize> {
    let p = ((1.0 + (1.0 + 4.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (p >= 1 && p * (p - 1) == len).then_some(p)
}

/// Inverse of [`vecd_strip`]: a `p×p` matrix with zero diagonal.
pub fn vecd_expand(v: &Vector) -> Result<Matrix> {
    let p = dim_from_vecd_len(v.len())
        .ok_or_else(|| domain(format!("vector length {} is not of the form p(p-1)", v.len())))?;
    let mut out = Matrix::zeros(p, p);
    let mut k = 0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                out[(i, j)] = v[k];
                k += 1;
            }
        }
    }
    Ok(out)
}

/// Position of entry `(i, j)`, `i != j`, inside `vecd°`.
pub fn vecd_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < p && j < p);
    j * (p - 1) + if i < j { i } else { i - 1 }
}

/// Inverse of [`vecd_index`].
pub fn vecd_position(p: usize, k: usize) -> (usize, usize) {
    let j = k / (p - 1);
    let i = k % (p - 1);
    (if i < j { i } else { i + 1 }, j)
}

/// A `p×p` invertible matrix with unit diagonal, stored with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    l: Matrix,
    inv: Matrix,
}

fn singularity_threshold(m: &Matrix) -> f64 {
    let p = m.nrows() as i32;
    let norm = crate::numerics::spectral_norm(m);
    p as f64 * 1e-12 * norm.powi(p)
}

impl MixingMatrix {
    /// Diagonal entries within 1e-12 of one are set to exactly one.
    pub fn new(mut l: Matrix) -> Result<Self> {
        let p = l.nrows();
        if l.ncols() != p || p < 2 {
            return Err(Error::Dimension {
                expected: "square matrix with p >= 2".into(),
                found: format!("{}x{}", l.nrows(), l.ncols()),
            });
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(domain("mixing matrix has non-finite entries"));
        }
        for i in 0..p {
            let d = l[(i, i)];
            if (d - 1.0).abs() > 1e-12 {
                return Err(domain(format!("mixing matrix diagonal entry {i} is {d}, expected 1")));
            }
            l[(i, i)] = 1.0;
        }
        let lu = l.clone().lu();
        let det = lu.determinant();
        if !(det.abs() > singularity_threshold(&l)) {
            return Err(Error::Singular { context: "mixing matrix", value: det });
        }
        let inv = lu.try_inverse().ok_or(Error::Singular { context: "mixing matrix", value: det })?;
        Ok(Self { l, inv })
    }

    pub fn identity(p: usize) -> Self {
        Self { l: Matrix::identity(p, p), inv: Matrix::identity(p, p) }
    }

    /// `I + vecd_expand(v)`.
    pub fn from_vecd(v: &Vector) -> Result<Self> {
        let e = vecd_expand(v)?;
        let p = e.nrows();
        Self::new(e + Matrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.l
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inv
    }

    pub fn into_matrix(self) -> Matrix {
        self.l
    }

    pub fn vecd(&self) -> Vector {
        vecd_strip(&self.l)
    }

    pub fn determinant(&self) -> f64 {
        self.l.determinant()
    }
}

/// Location and normalized mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParam {
    pub mu: Vector,
    pub l: MixingMatrix,
}

impl ThetaParam {
    pub fn new(mu: Vector, l: MixingMatrix) -> Result<Self> {
        if mu.len() != l.dim() {
            return Err(Error::Dimension {
                expected: format!("location of length {}", l.dim()),
                found: mu.len().to_string(),
            });
        }
        Ok(Self { mu, l })
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }
}

/// Outcome of [`normalize_pi_with_diagnostics`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub l: MixingMatrix,
    /// `permutation[i]` is the original column placed at position `i`.
    pub permutation: Vec<usize>,
    /// An exact tie occurred in the greedy assignment.
    pub tie: bool,
}

/// Representative `Π(Λ)` of the class `{Λ P D}` with unit diagonal.
pub fn normalize_pi(lambda: &Matrix) -> Result<MixingMatrix> {
    normalize_pi_with_diagnostics(lambda).map(|n| n.l)
}

pub fn normalize_pi_with_diagnostics(lambda: &Matrix) -> Result<Normalized> {
    let p = lambda.nrows();
    if lambda.ncols() != p || p < 2 {
        return Err(Error::Dimension {
            expected: "square matrix with p >= 2".into(),
            found: format!("{}x{}", lambda.nrows(), lambda.ncols()),
        });
    }
    let det = lambda.determinant();
    if !(det.abs() > singularity_threshold(lambda)) {
        return Err(Error::Singular { context: "normalize_pi input", value: det });
    }
    let mut b = lambda.clone();
    for mut col in b.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }

    let mut assigned = vec![false; p];
    let mut permutation = Vec::with_capacity(p);
    let mut tie = false;
    for i in 0..p {
        let mut best: Option<(usize, f64)> = None;
        let mut tied = false;
        for j in (0..p).filter(|&j| !assigned[j]) {
            let v = b[(i, j)].abs();
            match best {
                Some((_, bv)) if v < bv => {}
                Some((_, bv)) if v == bv => tied = true,
                _ => {
                    best = Some((j, v));
                    tied = false;
                }
            }
        }
        tie |= tied;
        let (j, _) = best.expect("an unassigned column remains");
        assigned[j] = true;
        permutation.push(j);
    }
    let permuted = Matrix::from_columns(&permutation.iter().map(|&j| b.column(j)).collect::<Vec<_>>());
    let dominant = (0..p).all(|i| ((i + 1)..p).all(|j| permuted[(i, i)].abs() > permuted[(i, j)].abs()));
    tie |= !dominant;

    let mut out = permuted;
    for j in 0..p {
        let d = out[(j, j)];
        if d == 0.0 {
            return Err(Error::Singular { context: "normalize_pi diagonal", value: 0.0 });
        }
        out.column_mut(j).scale_mut(1.0 / d);
        out[(j, j)] = 1.0;
    }
    Ok(Normalized { l: MixingMatrix::new(out)?, permutation, tie })
}

/// Row `i` of the result is `L⁻¹(X_i - μ)`.
pub fn residuals(theta: &ThetaParam, x: &Matrix) -> Result<Matrix> {
    let p = theta.dim();
    if x.ncols() != p {
        return Err(Error::Dimension { expected: format!("{p} columns"), found: x.ncols().to_string() });
    }
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        for j in 0..p {
            row[j] -= theta.mu[j];
        }
    }
    Ok(centered * theta.l.inverse().transpose())
}

fn snap(x: f64, mesh_inv: f64) -> f64 {
    let y = x.abs() * mesh_inv;
    let k = y.round();
    // values already on the grid stay put despite rounding in the product
    let k = if (y - k).abs() <= 1e-9 * k.max(1.0) { k } else { y.ceil() };
    x.signum() * k / mesh_inv
}

/// Snap `μ` and the off-diagonal entries of `L` to the grid of mesh
/// `(c√n)⁻¹`, rounding absolute values up.
pub fn discretize(theta: &ThetaParam, c: f64, n: usize) -> Result<ThetaParam> {
    if !(c > 0.0) || n == 0 {
        return Err(domain(format!("discretize requires c > 0 and n >= 1, got c={c}, n={n}")));
    }
    let m = c * (n as f64).sqrt();
    let mu = theta.mu.map(|x| snap(x, m));
    let mut l = theta.l.matrix().clone();
    let p = l.nrows();
    for j in 0..p {
        for i in 0..p {
            if i != j {
                l[(i, j)] = snap(l[(i, j)], m);
            }
        }
    }
    ThetaParam::new(mu, MixingMatrix::new(l)?)
}

/// Which rank statistic scales the line-search step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Gamma,
    Rho,
}

/// `L̃_λ = L̃ + n^{-1/2} λ T L̃(e_r e_sᵀ - diag(L̃ e_r e_sᵀ))` with `T = T_rs`
/// (gamma) or `T_sr` (rho). Only column `s` differs from `L̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedTheta {
    pub base: ThetaParam,
    pub r: usize,
    pub s: usize,
    pub lambda: f64,
    pub flavor: Flavor,
    /// `n^{-1/2} λ T`.
    pub epsilon: f64,
    pub l: MixingMatrix,
}

impl PerturbedTheta {
    pub fn theta(&self) -> ThetaParam {
        ThetaParam { mu: self.base.mu.clone(), l: self.l.clone() }
    }

    /// Residual columns `r` and `s` under the perturbed matrix, from the
    /// base residuals `z`. All other columns are unchanged.
    pub fn residual_columns(&self, z: &Matrix) -> Result<(Vector, Vector)> {
        perturbed_residual_columns(z, self.r, self.s, self.epsilon, self.base.l.matrix()[(self.s, self.r)])
    }

    /// Full residual matrix under the perturbed matrix, from base residuals.
    pub fn update_residuals(&self, z: &Matrix) -> Result<Matrix> {
        let (zr, zs) = self.residual_columns(z)?;
        let mut out = z.clone();
        out.set_column(self.r, &zr);
        out.set_column(self.s, &zs);
        Ok(out)
    }
}

/// With `L_λ = L M`, `M = I + ε(e_r - L_sr e_s)e_sᵀ`, the new residuals are
/// `M⁻¹ Z`: `z_s / (1 - ε L_sr)` and `z_r - ε z_s / (1 - ε L_sr)`.
pub(crate) fn perturbed_residual_columns(
    z: &Matrix,
    r: usize,
    s: usize,
    epsilon: f64,
    l_sr: f64,
) -> Result<(Vector, Vector)> {
    let denom = 1.0 - epsilon * l_sr;
    if !(denom.abs() > 1e-12) {
        return Err(Error::Singular { context: "line-search perturbation", value: denom });
    }
    let zs = z.column(s) / denom;
    let zr = z.column(r) - &zs * epsilon;
    Ok((zr, zs))
}

/// Perturb `theta` in direction `(r, s)` for the cross-information line
/// search. `t` is the rank-score matrix at `theta`.
pub fn perturb_for_line_search(
    theta: &ThetaParam,
    t: &Matrix,
    r: usize,
    s: usize,
    lambda: f64,
    flavor: Flavor,
    n: usize,
) -> Result<PerturbedTheta> {
    let p = theta.dim();
    if r == s || r >= p || s >= p {
        return Err(domain(format!("invalid pair ({r}, {s}) for p = {p}")));
    }
    if !(lambda >= 0.0) {
        return Err(domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let coef = match flavor {
        Flavor::Gamma => t[(r, s)],
        Flavor::Rho => t[(s, r)],
    };
    let epsilon = lambda * coef / (n as f64).sqrt();
    let base = theta.l.matrix();
    let l_sr = base[(s, r)];
    let mut l = base.clone();
    let new_col = base.column(s) + (base.column(r) - base.column(s) * l_sr) * epsilon;
    l.set_column(s, &new_col);
    l[(s, s)] = 1.0;
    Ok(PerturbedTheta {
        base: theta.clone(),
        r,
        s,
        lambda,
        flavor,
        epsilon,
        l: MixingMatrix::new(l)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, data.len() / rows, data)
    }

    /// `C = Σ_r Σ_s e_r e_rᵀ ⊗ u_s e_{s+δ[s≥r]}ᵀ` built literally.
    fn materialized_c(p: usize) -> Matrix {
        let e = |k: usize, dim: usize| Matrix::from_fn(dim, 1, |i, _| if i == k { 1.0 } else { 0.0 });
        let mut c = Matrix::zeros(p * (p - 1), p * p);
        for r in 0..p {
            for s in 0..(p - 1) {
                let shifted = if s >= r { s + 1 } else { s };
                let left = &e(r, p) * e(r, p).transpose();
                let right = &e(s, p - 1) * e(shifted, p).transpose();
                c += left.kronecker(&right);
            }
        }
        c
    }

    fn vec_col_major(a: &Matrix) -> Vector {
        Vector::from_iterator(a.len(), a.iter().copied())
    }

    #[test]
    fn strip_and_expand_examples() {
        let a = m(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vecd_strip(&a).as_slice(), &[3.0, 2.0]);
        assert_eq!(vecd_expand(&Vector::from_vec(vec![3.0, 2.0])).unwrap(), m(2, &[0.0, 2.0, 3.0, 0.0]));
        assert_eq!(vecd_strip(&Matrix::identity(3, 3)), Vector::zeros(6));
        assert!(vecd_expand(&Vector::zeros(5)).is_err());
    }

    #[test]
    fn implicit_c_matches_materialized() {
        let c2 = materialized_c(2);
        assert_eq!(c2, m(2, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        for p in 2..=4 {
            let c = materialized_c(p);
            let a = Matrix::from_fn(p, p, |i, j| (1 + i + 10 * j) as f64);
            assert_eq!(&c * vec_col_major(&a), vecd_strip(&a));
            let v = Vector::from_fn(p * (p - 1), |k, _| k as f64 + 0.5);
            assert_eq!(c.transpose() * &v, vec_col_major(&vecd_expand(&v).unwrap()));
            for k in 0..p * (p - 1) {
                let (i, j) = vecd_position(p, k);
                assert_eq!(vecd_index(p, i, j), k);
                assert_eq!(c[(k, i + j * p)], 1.0);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let id = Matrix::identity(2, 2);
        assert_relative_eq!(*normalize_pi(&m(2, &[2.0, 0.0, 0.0, 1.0])).unwrap().matrix(), id);
        assert_relative_eq!(*normalize_pi(&m(2, &[0.0, 3.0, 1.0, 0.0])).unwrap().matrix(), id);
        assert_relative_eq!(
            *normalize_pi(&m(2, &[2.0, 1.0, 1.0, 2.0])).unwrap().matrix(),
            m(2, &[1.0, 0.5, 0.5, 1.0]),
            epsilon = 1e-15
        );
        assert!(normalize_pi(&m(2, &[1.0, 1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn normalize_flags_ties() {
        let out = normalize_pi_with_diagnostics(&m(2, &[1.0, 1.0, -1.0, 1.0])).unwrap();
        assert!(out.tie);
        assert_eq!(out.permutation, vec![0, 1]);
        let clean = normalize_pi_with_diagnostics(&m(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!(!clean.tie);
    }

    #[test]
    fn residual_examples() {
        let x = m(3, &[1.0, 2.0, -1.0, 0.5, 3.0, 3.0]);
        let theta = ThetaParam::new(Vector::zeros(2), MixingMatrix::identity(2)).unwrap();
        assert_eq!(residuals(&theta, &x).unwrap(), x);
        let l = MixingMatrix::new(m(2, &[1.0, 0.4, -0.3, 1.0])).unwrap();
        let mu = Vector::from_vec(vec![1.0, -2.0]);
        let theta = ThetaParam::new(mu.clone(), l.clone()).unwrap();
        let z = residuals(&theta, &x).unwrap();
        for i in 0..3 {
            let rec = l.matrix() * z.row(i).transpose() + &mu;
            assert_relative_eq!(rec, x.row(i).transpose(), epsilon = 1e-12);
        }
    }

    #[test]
    fn discretize_examples() {
        let l = MixingMatrix::new(m(2, &[1.0, 0.3, 0.31, 1.0])).unwrap();
        let theta = ThetaParam::new(Vector::from_vec(vec![-0.31, 0.0]), l).unwrap();
        let d = discretize(&theta, 1.0, 100).unwrap();
        assert_eq!(d.l.matrix()[(0, 1)], 0.3);
        assert_eq!(d.l.matrix()[(1, 0)], 0.4);
        assert_eq!(d.mu[0], -0.4);
        assert_eq!(d.mu[1], 0.0);
        assert_eq!(discretize(&d, 1.0, 100).unwrap(), d);
    }

    #[test]
    fn perturbation_examples() {
        let theta = ThetaParam::new(Vector::zeros(2), MixingMatrix::identity(2)).unwrap();
        let t = m(2, &[0.0, 2.0, -1.0, 0.0]);
        let at_zero = perturb_for_line_search(&theta, &t, 0, 1, 0.0, Flavor::Gamma, 4).unwrap();
        assert_eq!(at_zero.l, theta.l);
        let moved = perturb_for_line_search(&theta, &t, 0, 1, 1.0, Flavor::Gamma, 4).unwrap();
        assert_eq!(*moved.l.matrix(), m(2, &[1.0, 1.0, 0.0, 1.0]));
        let rho = perturb_for_line_search(&theta, &t, 0, 1, 1.0, Flavor::Rho, 4).unwrap();
        assert_eq!(*rho.l.matrix(), m(2, &[1.0, -0.5, 0.0, 1.0]));
    }

    #[test]
    fn perturbed_residuals_match_direct() {
        let l = MixingMatrix::new(m(3, &[1.0, 0.2, -0.4, 0.3, 1.0, 0.1, -0.2, 0.5, 1.0])).unwrap();
        let theta = ThetaParam::new(Vector::from_vec(vec![0.1, 0.2, 0.3]), l).unwrap();
        let x = Matrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 0.77).sin());
        let z = residuals(&theta, &x).unwrap();
        let t = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { (i as f64) - 0.7 * j as f64 });
        for (r, s) in [(0, 1), (2, 0), (1, 2)] {
            let pert = perturb_for_line_search(&theta, &t, r, s, 1.7, Flavor::Gamma, 9).unwrap();
            let direct = residuals(&pert.theta(), &x).unwrap();
            assert_relative_eq!(pert.update_residuals(&z).unwrap(), direct, epsilon = 1e-12);
        }
    }
}
