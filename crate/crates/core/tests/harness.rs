use std::time::Instant;

use icarank::harness::{
    generate_sample, read_rows, replication_rng, run_cross_info_trace, run_estimation_campaign, run_test_campaign,
    EstimationRow, PreliminaryKind, Setup, SimulationConfig, TestCampaignConfig, TestRow, TracePoint,
};
use icarank::io::{read_matrix, write_matrix};
use icarank::{Execution, Location, Matrix, MixingMatrix, Vector};

fn small(setup: Setup, n: usize, m: usize) -> SimulationConfig {
    let mut cfg = SimulationConfig::for_setup(setup, n);
    cfg.replications = m;
    cfg
}

#[test]
fn setup_one_covariance_matches_mixing() {
    let l = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.4, 1.0]);
    let mut rng = replication_rng(3, 0, 0);
    let n = 100_000;
    let x = generate_sample(&Setup::Setup1.densities(), &l, &Vector::zeros(2), n, &mut rng);
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    let cov = c.transpose() * &c / n as f64;
    let expected = &l * Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 5.0 / 3.0])) * l.transpose();
    for (a, b) in cov.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 0.03 * expected.amax(), "{cov} vs {expected}");
    }
}

#[test]
fn identity_mixing_returns_raw_draws() {
    let g = Setup::Setup3.densities();
    let mut a = replication_rng(9, 4, 0);
    let mut b = replication_rng(9, 4, 0);
    let x = generate_sample(&g, &Matrix::identity(2, 2), &Vector::zeros(2), 50, &mut a);
    let mut raw = Matrix::zeros(50, 2);
    for i in 0..50 {
        for r in 0..2 {
            raw[(i, r)] = g.get(r).draw(&mut b);
        }
    }
    assert_eq!(x, raw);
}

#[test]
fn campaigns_are_reproducible_and_schedule_independent() {
    let mut cfg = small(Setup::Setup2, 300, 6);
    cfg.targets.truncate(2);
    cfg.execution = Execution::Parallel;
    let a = run_estimation_campaign(&cfg).unwrap();
    cfg.execution = Execution::Sequential;
    let b = run_estimation_campaign(&cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    a.write(dir_a.path(), "x").unwrap();
    b.write(dir_b.path(), "x").unwrap();
    for name in ["estimation.csv", "estimation_summary.csv", "estimation.svg"] {
        assert_eq!(
            std::fs::read(dir_a.path().join(name)).unwrap(),
            std::fs::read(dir_b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    cfg.master_seed += 1;
    assert_ne!(run_estimation_campaign(&cfg).unwrap().rows, a.rows);
}

#[test]
fn emitted_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Setup::Setup3, 300, 3);
    cfg.targets.truncate(1);
    let est = run_estimation_campaign(&cfg).unwrap();
    est.write(dir.path(), "setup3").unwrap();
    assert_eq!(read_rows::<EstimationRow>(&dir.path().join("estimation.csv")).unwrap(), est.rows);

    let test_cfg = TestCampaignConfig {
        base: small(Setup::Setup3, 200, 5),
        l0: MixingMatrix::identity(2),
        target: "setup3".parse().unwrap(),
        alpha: 0.05,
        h: None,
        location: Location::Median,
    };
    let t = run_test_campaign(&test_cfg).unwrap();
    t.write(dir.path()).unwrap();
    assert_eq!(read_rows::<TestRow>(&dir.path().join("test.csv")).unwrap(), t.rows);

    cfg.preliminaries = vec![PreliminaryKind::Fobi];
    cfg.replications = 1;
    let tr = run_cross_info_trace(&cfg, &"setup3".parse().unwrap()).unwrap();
    tr.write(dir.path()).unwrap();
    assert_eq!(read_rows::<TracePoint>(&dir.path().join("cross_info_trace.csv")).unwrap(), tr.points);

    let m = Matrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, -2.5e-17, 4.0, 5.5, 1e300]);
    let path = dir.path().join("m.csv");
    write_matrix(&path, &m, None).unwrap();
    assert_eq!(read_matrix(&path).unwrap(), m);
}

#[test]
fn single_replication_smoke_run_is_fast() {
    let start = Instant::now();
    let run = run_estimation_campaign(&small(Setup::Setup1, 4000, 1)).unwrap();
    assert_eq!(run.rows.len(), 8);
    assert!(run.rows.iter().all(|r| r.error.is_none()));
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn stored_p_values_serve_other_levels() {
    let cfg = TestCampaignConfig {
        base: small(Setup::Setup2, 200, 40),
        l0: MixingMatrix::identity(2),
        target: "setup2".parse().unwrap(),
        alpha: 0.05,
        h: Some(Matrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0])),
        location: Location::Median,
    };
    let run = run_test_campaign(&cfg).unwrap();
    let (r01, r05, r10) = (run.rejection_rate_at(0.01), run.rejection_rate_at(0.05), run.rejection_rate_at(0.10));
    assert!(r01 <= r05 && r05 <= r10);
    assert!((r05 - run.rejection_rate).abs() < 1e-12);
}
