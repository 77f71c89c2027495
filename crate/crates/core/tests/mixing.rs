use icarank::mixing::{discretize, normalize_pi, residuals, vecd_expand, vecd_index, vecd_position, vecd_strip};
use icarank::{Matrix, MixingMatrix, ThetaParam, Vector};
use proptest::prelude::*;

/// Unit-diagonal matrices with small off-diagonal entries are their own
/// normalized representative.
fn mixing(p: usize) -> impl Strategy<Value = MixingMatrix> {
    prop::collection::vec(-0.45f64..0.45, p * p).prop_filter_map("singular", move |v| {
        let m = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { v[i * p + j] / (p as f64 - 1.0) });
        MixingMatrix::new(m).ok().filter(|l| l.determinant().abs() > 0.3)
    })
}

fn permutation(p: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..p).collect::<Vec<_>>()).prop_shuffle()
}

fn arbitrary_dim() -> impl Strategy<Value = usize> {
    2usize..=5
}

proptest! {
    #[test]
    fn pi_ignores_column_permutation_and_scaling(
        (l, perm, scales) in arbitrary_dim().prop_flat_map(|p| (
            mixing(p),
            permutation(p),
            prop::collection::vec((0.1f64..10.0, any::<bool>()), p),
        ))
    ) {
        let p = l.dim();
        let pm = Matrix::from_fn(p, p, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
        let d = Matrix::from_diagonal(&Vector::from_iterator(p, scales.iter().map(|&(s, neg)| if neg { -s } else { s })));
        let back = normalize_pi(&(l.matrix() * pm * d)).unwrap();
        prop_assert!((back.matrix() - l.matrix()).amax() < 1e-10);
    }

    #[test]
    fn pi_is_idempotent(p in arbitrary_dim(), v in prop::collection::vec(-3.0f64..3.0, 25)) {
        let a = Matrix::from_fn(p, p, |i, j| v[i * 5 + j]);
        if let Ok(once) = normalize_pi(&a) {
            let twice = normalize_pi(once.matrix()).unwrap();
            prop_assert!((twice.matrix() - once.matrix()).amax() < 1e-12);
            prop_assert!(once.matrix().diagonal().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn vecd_strip_and_expand_are_adjoint(p in arbitrary_dim(), v in prop::collection::vec(-5.0f64..5.0, 25), w in prop::collection::vec(-5.0f64..5.0, 20)) {
        let a = Matrix::from_fn(p, p, |i, j| v[i * 5 + j]);
        let h = Vector::from_iterator(p * (p - 1), w.iter().copied().take(p * (p - 1)));
        // <C vec A, h> = <vec A, C' h>
        let lhs = vecd_strip(&a).dot(&h);
        let rhs = a.component_mul(&vecd_expand(&h).unwrap()).sum();
        prop_assert!((lhs - rhs).abs() < 1e-10);
        prop_assert_eq!(vecd_strip(&vecd_expand(&h).unwrap()), h);
        for k in 0..p * (p - 1) {
            let (i, j) = vecd_position(p, k);
            prop_assert!(i != j);
            prop_assert_eq!(vecd_index(p, i, j), k);
        }
    }

    #[test]
    fn discretization_is_idempotent_and_close(
        l in mixing(3),
        mu in prop::collection::vec(-10.0f64..10.0, 3),
        c in 0.5f64..5.0,
        n in 10usize..100_000,
    ) {
        let theta = ThetaParam::new(Vector::from_vec(mu), l).unwrap();
        let once = discretize(&theta, c, n).unwrap();
        let twice = discretize(&once, c, n).unwrap();
        prop_assert_eq!(&once, &twice);
        let mesh = 1.0 / (c * (n as f64).sqrt());
        prop_assert!((&once.mu - &theta.mu).amax() <= mesh * (1.0 + 1e-9));
        prop_assert!((once.l.matrix() - theta.l.matrix()).amax() <= mesh * (1.0 + 1e-9));
    }

    #[test]
    fn residuals_invert_the_model(l in mixing(3), mu in prop::collection::vec(-5.0f64..5.0, 3), z in prop::collection::vec(-3.0f64..3.0, 30)) {
        let z = Matrix::from_row_slice(10, 3, &z);
        let mu = Vector::from_vec(mu);
        let mut x = &z * l.matrix().transpose();
        for mut row in x.row_iter_mut() {
            row += mu.transpose();
        }
        let theta = ThetaParam::new(mu, l).unwrap();
        prop_assert!((residuals(&theta, &x).unwrap() - z).amax() < 1e-10);
    }
}

#[test]
fn singular_input_is_rejected() {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
    assert!(matches!(normalize_pi(&a), Err(icarank::Error::Singular { .. })));
}
