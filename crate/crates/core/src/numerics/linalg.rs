//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Moore–Penrose pseudoinverse. Singular values below
/// `max(rows, cols) * ‖M‖₂ * 1e-12` are treated as zero.
pub fn pseudoinverse(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = rows.max(cols) as f64 * smax * 1e-12;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Numerical rank, with the same threshold as [`pseudoinverse`].
pub fn rank(m: &Matrix) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let tol = rows.max(cols) as f64 * s.max() * 1e-12;
    s.iter().filter(|&&v| v > tol).count()
}

/// Cholesky factor `L` with `M = L Lᵀ`. Fails with the offending pivot when
/// `M` is not numerically positive definite.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > scale * 1e-12) {
            return Err(Error::Singular { context: "Cholesky pivot", value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &Vector) -> Vector {
    let y = l.solve_lower_triangular(b).expect("nonzero diagonal");
    l.transpose().solve_upper_triangular(&y).expect("nonzero diagonal")
}

/// Solve `M x = b` for symmetric positive definite `M`.
pub fn solve_spd(m: &Matrix, b: &Vector) -> Result<Vector> {
    let l = cholesky(m)?;
    Ok(cholesky_solve(&l, b))
}

/// Inverse of a symmetric positive definite matrix.
pub fn inverse_spd(m: &Matrix) -> Result<Matrix> {
    let l = cholesky(m)?;
    let n = m.nrows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let e = Vector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        inv.set_column(j, &cholesky_solve(&l, &e));
    }
    Ok(inv.symmetric_part())
}

trait SymmetricPart {
    fn symmetric_part(self) -> Self;
}

impl SymmetricPart for Matrix {
    fn symmetric_part(self) -> Self {
        let t = self.transpose();
        (self + t) * 0.5
    }
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues sorted in
/// decreasing order with matching eigenvector columns.
pub fn symmetric_eigen(m: &Matrix) -> (Vector, Matrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = Vector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Matrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// General inverse via LU, with a determinant-based singularity guard.
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let lu = m.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() < 1e-14 * spectral_norm(m).powi(m.nrows() as i32) {
        return Err(Error::Singular { context: "matrix inverse", value: det });
    }
    lu.try_inverse().ok_or(Error::Singular { context: "matrix inverse", value: det })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_identity_and_rank_deficient_diagonal() {
        let i = Matrix::identity(3, 3);
        assert_relative_eq!(pseudoinverse(&i), i, epsilon = 1e-14);
        let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let expected = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert_relative_eq!(pseudoinverse(&d), expected, epsilon = 1e-14);
        assert_eq!(pseudoinverse(&Matrix::zeros(2, 3)), Matrix::zeros(3, 2));
    }

    #[test]
    fn spd_solve_residual() {
        let m = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let b = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = solve_spd(&m, &b).unwrap();
        assert!((&m * x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn spd_solve_reports_singularity() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match solve_spd(&m, &Vector::from_vec(vec![1.0, 1.0])) {
            Err(Error::Singular { value, .. }) => assert!(value.abs() < 1e-12),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn eigen_reconstructs() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.4, 0.1, -0.4, 0.5]);
        let (vals, vecs) = symmetric_eigen(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rec = &vecs * Matrix::from_diagonal(&vals) * vecs.transpose();
        assert_relative_eq!(rec, m, epsilon = 1e-9);
    }
}
