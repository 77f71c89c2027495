use icarank::mixing::Flavor;
use icarank::r_estimator::{definitional_update, explicit_update, h_lambda};
use icarank::{
    estimate_cross_info, fobi, location_median, one_step_estimate, squared_error, ComponentDensities, Execution,
    LineSearchOptions, Matrix, Vector, MixingMatrix, OneStepOptions, Preliminary, ThetaParam,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(g: &ComponentDensities, l: &Matrix, n: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Matrix::from_fn(n, g.dim(), |_, r| g.get(r).draw(&mut rng));
    z * l.transpose()
}

fn start(x: &Matrix, l: MixingMatrix) -> ThetaParam {
    ThetaParam::new(location_median(x, &l).unwrap(), l).unwrap()
}

#[test]
fn fast_line_search_matches_full_recomputation() {
    let g: ComponentDensities = "logistic,t:5,t:8".parse().unwrap();
    let l = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, -0.1, 1.0, 0.3, 0.2, 0.0, 1.0]);
    let x = sample(&g, &l, 400, 1);
    let tilde = MixingMatrix::new(Matrix::from_row_slice(3, 3, &[1.0, 0.25, 0.05, -0.05, 1.0, 0.2, 0.1, 0.05, 1.0])).unwrap();
    // A fixed location keeps residual magnitudes tie-free; the even-n median
    // produces an exact tie that rounding may break differently per path.
    let theta = ThetaParam::new(Vector::from_vec(vec![0.013, -0.021, 0.007]), tilde).unwrap();
    let opts = LineSearchOptions { c: 20.0, lambda_max: 3.0 };
    let est = estimate_cross_info(&x, &theta, &g, &opts, Execution::Sequential).unwrap();
    assert_eq!(est.traces.len(), 12);
    for tr in &est.traces {
        for (&lambda, &h) in tr.lambdas.iter().zip(&tr.h).step_by(7) {
            let slow = h_lambda(&x, &theta, &g, tr.r, tr.s, lambda, tr.flavor).unwrap();
            assert!((slow - h).abs() < 1e-9 * (1.0 + h.abs()), "{:?} ({},{}) at {lambda}: {h} vs {slow}", tr.flavor, tr.r, tr.s);
        }
    }
}

#[test]
fn explicit_and_definitional_updates_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..100 {
        let p = 2 + k % 3;
        let l = loop {
            let m = Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rng.random_range(-0.4..0.4) });
            if let Ok(l) = MixingMatrix::new(m) {
                break l;
            }
        };
        let off = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| Matrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { rng.random_range(lo..hi) });
        let gamma = off(&mut rng, 0.6, 2.5);
        let rho = off(&mut rng, 0.2, 0.9);
        let t = off(&mut rng, -3.0, 3.0);
        let a = explicit_update(&l, &t, &gamma, &rho, 1000).unwrap();
        let b = definitional_update(&l, &t, &gamma, &rho, 1000).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-10);
        assert!(a.matrix().diagonal().iter().all(|&d| d == 1.0));
    }
}

#[test]
fn finer_grid_changes_estimates_little() {
    let g: ComponentDensities = "logistic,t:5".parse().unwrap();
    let x = sample(&g, &Matrix::identity(2, 2), 2000, 3);
    let theta = start(&x, fobi(&x).unwrap());
    let coarse = estimate_cross_info(&x, &theta, &g, &LineSearchOptions { c: 100.0, lambda_max: 20.0 }, Execution::Sequential).unwrap();
    let fine = estimate_cross_info(&x, &theta, &g, &LineSearchOptions { c: 200.0, lambda_max: 20.0 }, Execution::Sequential).unwrap();
    for (a, b) in coarse.gamma_hat.iter().zip(fine.gamma_hat.iter()).chain(coarse.rho_hat.iter().zip(fine.rho_hat.iter())) {
        if *a != 0.0 {
            // Roots move by at most one coarse grid step in λ = 1/estimate.
            assert!((1.0 / a - 1.0 / b).abs() <= 0.0101, "{a} vs {b}");
        }
    }
}

#[test]
fn fobi_recovers_mixing_with_distinct_kurtoses() {
    // FOBI needs finite eighth moments to be root-n consistent.
    let g: ComponentDensities = "gaussian,logistic".parse().unwrap();
    let l = Matrix::from_row_slice(2, 2, &[1.0, 0.4, -0.3, 1.0]);
    let x = sample(&g, &l, 40_000, 4);
    let est = fobi(&x).unwrap();
    assert!(squared_error(est.matrix(), &l) < 0.01, "{}", est.matrix());
}

#[test]
fn one_step_improves_a_perturbed_start() {
    let g: ComponentDensities = "logistic,t:5".parse().unwrap();
    let l = Matrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 1.0]);
    let mut before = 0.0;
    let mut after = 0.0;
    for seed in 0..10 {
        let x = sample(&g, &l, 3000, 100 + seed);
        let tilde = MixingMatrix::new(&l + Matrix::from_row_slice(2, 2, &[0.0, 0.08, -0.08, 0.0])).unwrap();
        let opts = OneStepOptions { preliminary: Preliminary::Given(tilde.clone()), ..OneStepOptions::default() };
        let res = one_step_estimate(&x, &g, &opts).unwrap();
        assert!(res.l_hat.matrix().diagonal().iter().all(|&d| d == 1.0));
        before += squared_error(tilde.matrix(), &l);
        after += squared_error(res.l_hat.matrix(), &l);
    }
    assert!(after < 0.5 * before, "{after} vs {before}");
}

#[test]
fn result_record_round_trips_through_json() {
    let g: ComponentDensities = "logistic,t:5".parse().unwrap();
    let x = sample(&g, &Matrix::identity(2, 2), 500, 5);
    let res = one_step_estimate(&x, &g, &OneStepOptions::default()).unwrap();
    let back: icarank::r_estimator::OneStepRecord = serde_json::from_str(&res.to_json()).unwrap();
    assert_eq!(back, res.record());
    assert_eq!(back.traces.len(), 4);
    assert!(matches!(back.traces[0].flavor, Flavor::Gamma));
}
