//! Root-n consistent starting points: FOBI, deflation FastICA with the pow3
//! nonlinearity, and the transformation-retransformation median.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mixing::{normalize_pi, MixingMatrix};
use crate::numerics::{symmetric_eigen, Matrix, Vector};

/// Centered, whitened data `Y = (X - x̄) W` with `W = Σ^{-1/2}` symmetric.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub mean: Vector,
    pub whitener: Matrix,
    /// `Σ^{1/2}`.
    pub dewhitener: Matrix,
    pub y: Matrix,
}

/// Whiten with the inverse square root of the sample covariance (divisor `n`).
pub fn whiten(x: &Matrix) -> Result<Whitening> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData { n, need: p + 1 });
    }
    let mean = Vector::from_fn(p, |j, _| x.column(j).mean());
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = xc.transpose() * &xc / n as f64;
    let (vals, vecs) = symmetric_eigen(&cov);
    let smallest = vals[p - 1];
    if !(smallest > 1e-12 * vals[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular { context: "sample covariance", value: smallest });
    }
    let whitener = &vecs * Matrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt())) * vecs.transpose();
    let dewhitener = &vecs * Matrix::from_diagonal(&vals.map(f64::sqrt)) * vecs.transpose();
    let y = xc * &whitener;
    Ok(Whitening { mean, whitener, dewhitener, y })
}

/// FOBI estimate with the eigenvalues of the fourth-moment matrix.
#[derive(Debug, Clone)]
pub struct FobiFit {
    pub l: MixingMatrix,
    pub kurtosis_eigenvalues: Vector,
    /// Smallest gap between consecutive eigenvalues relative to the largest;
    /// near zero means the rotation is poorly determined.
    pub min_relative_gap: f64,
}

pub fn fobi_fit(x: &Matrix) -> Result<FobiFit> {
    let w = whiten(x)?;
    let (n, p) = w.y.shape();
    let mut b = Matrix::zeros(p, p);
    for row in w.y.row_iter() {
        let r2 = row.norm_squared();
        b += row.transpose() * row * r2;
    }
    b /= n as f64;
    let (vals, u) = symmetric_eigen(&b);
    let top = vals[0].abs().max(f64::MIN_POSITIVE);
    let min_relative_gap = (1..p).map(|k| (vals[k - 1] - vals[k]) / top).fold(f64::INFINITY, f64::min);
    let l = normalize_pi(&(&w.dewhitener * u))?;
    Ok(FobiFit { l, kurtosis_eigenvalues: vals, min_relative_gap })
}

/// FOBI mixing estimate, normalized by `Π`.
pub fn fobi(x: &Matrix) -> Result<MixingMatrix> {
    fobi_fit(x).map(|f| f.l)
}

const FASTICA_MAX_ITER: usize = 500;
const FASTICA_RESTARTS: usize = 3;
const FASTICA_TOL: f64 = 1e-9;

/// Deflation FastICA in whitened space; rows of the result are orthonormal.
pub fn fastica_unmixing(y: &Matrix, seed: u64) -> Result<Matrix> {
    let (n, p) = y.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vector> = Vec::with_capacity(p);
    let deflate = |w: &mut Vector, found: &[Vector]| {
        for v in found {
            let d = w.dot(v);
            *w -= v * d;
        }
        let norm = w.norm();
        *w /= norm;
    };
    for k in 0..p {
        let mut converged = None;
        'attempts: for _ in 0..=FASTICA_RESTARTS {
            let mut w = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            deflate(&mut w, &found);
            for _ in 0..FASTICA_MAX_ITER {
                let proj = y * &w;
                let mut next = y.transpose() * proj.map(|v| v * v * v) / n as f64 - &w * 3.0;
                deflate(&mut next, &found);
                if !next.iter().all(|v| v.is_finite()) {
                    break;
                }
                let done = next.dot(&w).abs() > 1.0 - FASTICA_TOL;
                w = next;
                if done {
                    converged = Some(w);
                    break 'attempts;
                }
            }
        }
        found.push(converged.ok_or(Error::NonConvergence { component: k + 1 })?);
    }
    Ok(Matrix::from_rows(&found.iter().map(|w| w.transpose()).collect::<Vec<_>>()))
}

/// FastICA (deflation, pow3) mixing estimate, normalized by `Π`. The seed
/// fixes the random starting vectors.
pub fn fastica_pow3(x: &Matrix, seed: u64) -> Result<MixingMatrix> {
    let w = whiten(x)?;
    let u = fastica_unmixing(&w.y, seed)?;
    normalize_pi(&(&w.dewhitener * u.transpose()))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `L Med[L⁻¹X_1, …, L⁻¹X_n]` with componentwise medians.
pub fn location_median(x: &Matrix, l: &MixingMatrix) -> Result<Vector> {
    let p = l.dim();
    if x.ncols() != p {
        return Err(Error::Dimension { expected: format!("{p} columns"), found: x.ncols().to_string() });
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData { n: 0, need: 1 });
    }
    let z = x * l.inverse().transpose();
    let med = Vector::from_fn(p, |j, _| median(&mut z.column(j).iter().copied().collect::<Vec<_>>()));
    Ok(l.matrix() * med)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn data() -> Matrix {
        Matrix::from_fn(300, 2, |i, j| {
            let t = i as f64;
            if j == 0 { (t * 0.7).sin().powi(3) * 2.0 } else { (t * 1.3).cos() + 0.2 * (t * 0.11).sin() }
        })
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let w = whiten(&data()).unwrap();
        let cov = w.y.transpose() * &w.y / 300.0;
        assert_relative_eq!(cov, Matrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn fastica_rows_orthonormal_and_deterministic() {
        let w = whiten(&data()).unwrap();
        let u = fastica_unmixing(&w.y, 7).unwrap();
        assert_relative_eq!(&u * u.transpose(), Matrix::identity(2, 2), epsilon = 1e-8);
        assert_eq!(fastica_pow3(&data(), 7).unwrap(), fastica_pow3(&data(), 7).unwrap());
    }

    #[test]
    fn median_examples() {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 5.0, 3.0, -1.0, 2.0, 0.0, 10.0, 2.0]);
        let m = location_median(&x, &MixingMatrix::identity(2)).unwrap();
        assert_eq!(m.as_slice(), &[2.5, 1.0]);
        let shifted = x.map_with_location(|_, j, v| v + [1.0, -3.0][j]);
        let ms = location_median(&shifted, &MixingMatrix::identity(2)).unwrap();
        assert_eq!(ms.as_slice(), &[3.5, -2.0]);
    }
}
