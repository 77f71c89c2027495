//! Marginal signs and ranks of absolute residuals, the rank-score matrix
//! `T` and the signed-rank efficient central sequence `Δ*`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::mixing::{residuals, vecd_strip, ThetaParam};
use crate::numerics::{Matrix, Vector};
use crate::scores::{ComponentDensities, SymmetricDensity};

/// Signs and ranks of the absolute values, one column per component.
/// Ranks run from 1 (smallest) to `n`; ties go to the lower row index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedRankTable {
    n: usize,
    p: usize,
    signs: Vec<Vec<i8>>,
    ranks: Vec<Vec<u32>>,
    zeros: usize,
}

/// Signs and ranks of a single column; returns the number of exact zeros.
fn column_signed_ranks(col: impl Iterator<Item = f64>, signs: &mut Vec<i8>, ranks: &mut Vec<u32>) -> usize {
    signs.clear();
    let mut keyed: Vec<(f64, u32)> = Vec::new();
    let mut zeros = 0;
    for (i, z) in col.enumerate() {
        if z == 0.0 {
            zeros += 1;
        }
        signs.push(if z < 0.0 { -1 } else { 1 });
        keyed.push((z.abs(), i as u32));
    }
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranks.clear();
    ranks.resize(keyed.len(), 0);
    for (rank, &(_, i)) in keyed.iter().enumerate() {
        ranks[i as usize] = rank as u32 + 1;
    }
    zeros
}

impl SignedRankTable {
    /// Exact zeros get sign `+1` and are counted in [`Self::zero_count`].
    pub fn compute(z: &Matrix) -> Result<Self> {
        let (n, p) = z.shape();
        if n < 2 {
            return Err(Error::InsufficientData { n, need: 2 });
        }
        let mut signs = Vec::with_capacity(p);
        let mut ranks = Vec::with_capacity(p);
        let mut zeros = 0;
        for c in 0..p {
            let (mut s, mut r) = (Vec::with_capacity(n), Vec::with_capacity(n));
            zeros += column_signed_ranks(z.column(c).iter().copied(), &mut s, &mut r);
            signs.push(s);
            ranks.push(r);
        }
        Ok(Self { n, p, signs, ranks, zeros })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn signs(&self, column: usize) -> &[i8] {
        &self.signs[column]
    }

    pub fn ranks(&self, column: usize) -> &[u32] {
        &self.ranks[column]
    }

    /// Number of residuals that were exactly zero.
    pub fn zero_count(&self) -> usize {
        self.zeros
    }
}

pub fn compute_signed_ranks(z: &Matrix) -> Result<SignedRankTable> {
    SignedRankTable::compute(z)
}

/// `F₊⁻¹(k/(n+1))` and `φ(F₊⁻¹(k/(n+1)))` for `k = 1..=n`, indexed by `k-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub quantiles: Vec<f64>,
    pub scores: Vec<f64>,
}

impl ScoreTable {
    pub fn new(d: &SymmetricDensity, n: usize) -> Self {
        let m = (n + 1) as f64;
        let quantiles: Vec<f64> = (1..=n)
            .map(|k| d.abs_quantile_pair(k as f64 / m, (n + 1 - k) as f64 / m))
            .collect();
        let scores = quantiles.iter().map(|&q| d.location_score(q)).collect();
        Self { quantiles, scores }
    }

    pub fn len(&self) -> usize {
        self.quantiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantiles.is_empty()
    }
}

type CacheKey = (usize, String);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<ScoreTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<ScoreTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Score tables for every component of `f` at sample size `n`. Tables depend
/// only on `(n, f_r)` and are shared process-wide.
#[derive(Debug, Clone)]
pub struct ScoreTables {
    n: usize,
    tables: Vec<Arc<ScoreTable>>,
}

impl ScoreTables {
    pub fn new(f: &ComponentDensities, n: usize) -> Self {
        let tables = f
            .components()
            .iter()
            .map(|d| {
                let key = (n, format!("{:?}", d));
                if let Some(t) = cache().lock().expect("score cache poisoned").get(&key) {
                    return Arc::clone(t);
                }
                let t = Arc::new(ScoreTable::new(d, n));
                cache().lock().expect("score cache poisoned").insert(key, Arc::clone(&t));
                t
            })
            .collect();
        Self { n, tables }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.tables.len()
    }

    pub fn component(&self, r: usize) -> &ScoreTable {
        &self.tables[r]
    }
}

fn check_compatible(table: &SignedRankTable, scores: &ScoreTables) -> Result<()> {
    if table.n != scores.n || table.p != scores.p() {
        return Err(Error::Dimension {
            expected: format!("n = {}, p = {}", scores.n, scores.p()),
            found: format!("n = {}, p = {}", table.n, table.p),
        });
    }
    Ok(())
}

/// `T_rs = n^{-1/2} Σ_i S_ir S_is φ_r(F₊r⁻¹(R_ir/(n+1))) F₊s⁻¹(R_is/(n+1))`
/// for `r ≠ s`; the diagonal is zero.
pub fn rank_score_matrix(table: &SignedRankTable, scores: &ScoreTables) -> Result<Matrix> {
    check_compatible(table, scores)?;
    let (n, p) = (table.n, table.p);
    let a = Matrix::from_fn(n, p, |i, r| {
        f64::from(table.signs[r][i]) * scores.tables[r].scores[table.ranks[r][i] as usize - 1]
    });
    let b = Matrix::from_fn(n, p, |i, s| {
        f64::from(table.signs[s][i]) * scores.tables[s].quantiles[table.ranks[s][i] as usize - 1]
    });
    let mut t = a.transpose() * b / (n as f64).sqrt();
    t.fill_diagonal(0.0);
    Ok(t)
}

/// Single entry `T_rs` from residual columns `z_r` and `z_s`.
pub fn rank_score_entry(
    z_r: impl Iterator<Item = f64>,
    z_s: impl Iterator<Item = f64>,
    scores: &ScoreTables,
    r: usize,
    s: usize,
) -> f64 {
    let (mut sr, mut rr, mut ss, mut rs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    column_signed_ranks(z_r, &mut sr, &mut rr);
    column_signed_ranks(z_s, &mut ss, &mut rs);
    debug_assert_eq!(rr.len(), scores.n);
    let (tr, ts) = (&scores.tables[r], &scores.tables[s]);
    let sum: f64 = (0..rr.len())
        .map(|i| {
            f64::from(sr[i] * ss[i]) * tr.scores[rr[i] as usize - 1] * ts.quantiles[rs[i] as usize - 1]
        })
        .sum();
    sum / (rr.len() as f64).sqrt()
}

/// `Σ_i sign(z_i) table[R_i - 1] w_i`, with `R_i` the rank of `|z_i|`.
/// `scratch` is reused across calls to avoid reallocating sort keys.
pub fn signed_rank_dot(z: &[f64], table: &[f64], weights: &[f64], scratch: &mut Vec<(f64, u32)>) -> f64 {
    debug_assert!(z.len() == table.len() && z.len() == weights.len());
    scratch.clear();
    scratch.extend(z.iter().enumerate().map(|(i, v)| (v.abs(), i as u32)));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scratch
        .iter()
        .zip(table)
        .map(|(&(_, i), &score)| {
            let i = i as usize;
            let v = if z[i] < 0.0 { -score } else { score };
            v * weights[i]
        })
        .sum()
}

/// `vecd°((L⁻¹)ᵀ T)`, the central sequence given `T` and `L⁻¹`.
pub fn central_sequence_from_t(l_inv: &Matrix, t: &Matrix) -> Vector {
    vecd_strip(&(l_inv.transpose() * t))
}

/// Central sequence together with the statistics it was built from.
#[derive(Debug, Clone)]
pub struct CentralSequence {
    pub delta: Vector,
    pub t: Matrix,
    pub zero_residuals: usize,
}

/// Residuals, signed ranks, `T`, then `Δ* = vecd°((L⁻¹)ᵀ T)`.
pub fn efficient_central_sequence(
    theta: &ThetaParam,
    f: &ComponentDensities,
    x: &Matrix,
) -> Result<CentralSequence> {
    if f.dim() != theta.dim() {
        return Err(Error::Dimension { expected: format!("{} target densities", theta.dim()), found: f.dim().to_string() });
    }
    let z = residuals(theta, x)?;
    let table = SignedRankTable::compute(&z)?;
    let scores = ScoreTables::new(f, table.n());
    let t = rank_score_matrix(&table, &scores)?;
    Ok(CentralSequence {
        delta: central_sequence_from_t(theta.l.inverse(), &t),
        t,
        zero_residuals: table.zero_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::MixingMatrix;
    use crate::numerics::std_normal_quantile;
    use approx::assert_relative_eq;

    fn gauss2() -> ComponentDensities {
        "gaussian,gaussian".parse().unwrap()
    }

    #[test]
    fn signed_rank_examples() {
        let z = Matrix::from_column_slice(3, 2, &[-1.2, 0.5, -0.3, 0.1, 0.2, 0.3]);
        let t = SignedRankTable::compute(&z).unwrap();
        assert_eq!(t.signs(0), &[-1, 1, -1]);
        assert_eq!(t.ranks(0), &[3, 2, 1]);
        assert_eq!(t.ranks(1), &[1, 2, 3]);
        assert_eq!(t.signs(1), &[1, 1, 1]);
    }

    #[test]
    fn ties_and_zeros() {
        let z = Matrix::from_column_slice(4, 2, &[0.5, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 4.0]);
        let t = SignedRankTable::compute(&z).unwrap();
        assert_eq!(t.ranks(0), &[2, 3, 1, 4]);
        assert_eq!(t.signs(0), &[1, -1, 1, 1]);
        assert_eq!(t.zero_count(), 1);
        assert!(SignedRankTable::compute(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn hand_example_t12() {
        let z = Matrix::from_row_slice(2, 2, &[1.0, -2.0, -3.0, 4.0]);
        let table = SignedRankTable::compute(&z).unwrap();
        let t = rank_score_matrix(&table, &ScoreTables::new(&gauss2(), 2)).unwrap();
        let a = |k: f64| std_normal_quantile((k / 3.0 + 1.0) / 2.0).unwrap();
        let expected = -(a(1.0).powi(2) + a(2.0).powi(2)) / 2f64.sqrt();
        assert_relative_eq!(t[(0, 1)], expected, epsilon = 1e-14);
        assert_eq!(t[(0, 0)], 0.0);
        assert_eq!(t[(1, 1)], 0.0);
    }

    #[test]
    fn entry_fast_path_matches_matrix() {
        let z = Matrix::from_fn(31, 3, |i, j| ((i * 7 + j * 13) as f64 * 0.618).sin());
        let f: ComponentDensities = "t:5,logistic,gaussian".parse().unwrap();
        let scores = ScoreTables::new(&f, 31);
        let t = rank_score_matrix(&SignedRankTable::compute(&z).unwrap(), &scores).unwrap();
        for (r, s) in [(0, 1), (1, 0), (2, 0), (1, 2)] {
            let e = rank_score_entry(z.column(r).iter().copied(), z.column(s).iter().copied(), &scores, r, s);
            assert_relative_eq!(e, t[(r, s)], epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_mixing_strips_t() {
        let x = Matrix::from_fn(20, 2, |i, j| ((i + 3 * j) as f64 * 1.3).cos());
        let theta = ThetaParam::new(Vector::zeros(2), MixingMatrix::identity(2)).unwrap();
        let cs = efficient_central_sequence(&theta, &gauss2(), &x).unwrap();
        assert_eq!(cs.delta.as_slice(), &[cs.t[(1, 0)], cs.t[(0, 1)]]);
    }
}
