//! Seeded Monte Carlo campaigns: estimation accuracy, test size and power,
//! and cross-information line-search traces.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{local_power, local_power_with, test_simple, GammaStarSpec, Location, SimpleTestOptions};
use crate::mixing::{Flavor, MixingMatrix, ThetaParam};
use crate::numerics::{Matrix, Vector};
use crate::par::Execution;
use crate::r_estimator::{
    estimate_cross_info, fastica_pow3, fobi, location_median, one_step_estimate, squared_error, OneStepOptions,
    Preliminary,
};
use crate::scores::{cross_info_matrices, ComponentDensities};

use super::config::{DensitySpec, EstimatorSpec, PreliminaryKind, SimulationConfig};
use super::rng::{derived_seed, replication_rng, DATA_STREAM, FASTICA_STREAM};
use super::svg::{boxplot_grid, line_grid, quantile_sorted, LinePanel};

/// Rows `X_i = L z_i + μ`, with `z_i` drawn componentwise from `g`.
pub fn generate_sample<R: Rng + ?Sized>(
    g: &ComponentDensities,
    l: &Matrix,
    mu: &Vector,
    n: usize,
    rng: &mut R,
) -> Matrix {
    let p = g.dim();
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        for r in 0..p {
            z[(i, r)] = g.get(r).draw(rng);
        }
    }
    let mut x = z * l.transpose();
    for mut row in x.row_iter_mut() {
        row += mu.transpose();
    }
    x
}

/// Sample of replication `replication` under `cfg`.
pub fn replication_sample(cfg: &SimulationConfig, l: &Matrix, replication: usize) -> Matrix {
    let mut rng = replication_rng(cfg.master_seed, replication as u64, DATA_STREAM);
    generate_sample(&cfg.model.densities, l, &cfg.mu_true, cfg.n, &mut rng)
}

fn fit_preliminary(kind: PreliminaryKind, x: &Matrix, seed: u64, replication: usize) -> Result<MixingMatrix> {
    match kind {
        PreliminaryKind::Fobi => fobi(x),
        PreliminaryKind::FastIca => fastica_pow3(x, derived_seed(seed, replication as u64, FASTICA_STREAM)),
    }
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed * 10 > total {
        return Err(Error::TooManyFailures { failed, total });
    }
    Ok(())
}

fn write_comment_header<W: Write>(w: &mut W, echo: &str) -> Result<()> {
    for line in echo.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_rows<T: Serialize>(path: &Path, echo: &str, rows: &[T]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_comment_header(&mut file, echo)?;
    let mut wtr = csv::Writer::from_writer(file);
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read rows written by this module; `#` lines carry the config echo.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    rdr.deserialize()
        .enumerate()
        .map(|(k, r)| r.map_err(|e| Error::Parse { line: k + 2, msg: e.to_string() }))
        .collect()
}

/// One estimator run within a replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub replication: usize,
    pub estimator: String,
    pub squared_error: Option<f64>,
    pub fallbacks: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub runs: usize,
    pub failures: usize,
    pub runs_with_fallback: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct EstimationCampaign {
    pub config_echo: String,
    pub rows: Vec<EstimationRow>,
    /// Wall-clock seconds per row, kept apart so `rows` are reproducible.
    pub seconds: Vec<f64>,
    pub summaries: Vec<EstimatorSummary>,
}

impl EstimationCampaign {
    pub fn summary(&self, estimator: &str) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }

    pub fn errors(&self, estimator: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.estimator == estimator).filter_map(|r| r.squared_error).collect()
    }

    /// `estimation.csv`, `estimation_summary.csv`, `timings.csv` and a
    /// boxplot `estimation.svg` in `dir`.
    pub fn write(&self, dir: &Path, title: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("estimation.csv"), &self.config_echo, &self.rows)?;
        write_rows(&dir.join("estimation_summary.csv"), &self.config_echo, &self.summaries)?;
        let timing: Vec<(usize, String, f64)> =
            self.rows.iter().zip(&self.seconds).map(|(r, &s)| (r.replication, r.estimator.clone(), s)).collect();
        write_rows(&dir.join("timings.csv"), &self.config_echo, &timing)?;
        let boxes = self.summaries.iter().map(|s| (s.estimator.clone(), self.errors(&s.estimator))).collect();
        std::fs::write(dir.join("estimation.svg"), boxplot_grid(&[(title.to_string(), boxes)], true))?;
        Ok(())
    }
}

fn summarize(estimator: &str, rows: &[&EstimationRow]) -> EstimatorSummary {
    let mut v: Vec<f64> = rows.iter().filter_map(|r| r.squared_error).collect();
    v.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&v, p);
    EstimatorSummary {
        estimator: estimator.to_string(),
        runs: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        runs_with_fallback: rows.iter().filter(|r| r.fallbacks > 0).count(),
        min: q(0.0),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: q(1.0),
    }
}

fn run_replication(cfg: &SimulationConfig, estimators: &[EstimatorSpec], m: usize) -> Vec<(EstimationRow, f64)> {
    let x = replication_sample(cfg, cfg.l_true.matrix(), m);
    let truth = cfg.l_true.matrix();
    let mut prelims: HashMap<PreliminaryKind, (std::result::Result<MixingMatrix, String>, f64)> = HashMap::new();
    let mut prelim = |kind: PreliminaryKind| {
        prelims
            .entry(kind)
            .or_insert_with(|| {
                let start = Instant::now();
                let fit = fit_preliminary(kind, &x, cfg.master_seed, m).map_err(|e| e.to_string());
                (fit, start.elapsed().as_secs_f64())
            })
            .clone()
    };
    let mut out = Vec::with_capacity(estimators.len());
    for est in estimators {
        let label = est.label();
        let (result, seconds) = match est {
            EstimatorSpec::Competitor(kind) => {
                let (fit, secs) = prelim(*kind);
                (fit.map(|l| (squared_error(l.matrix(), truth), 0)), secs)
            }
            EstimatorSpec::R { target, preliminary } => {
                let (fit, _) = prelim(*preliminary);
                let start = Instant::now();
                let res = fit.and_then(|l| {
                    let opts = OneStepOptions {
                        preliminary: Preliminary::Given(l),
                        line_search: cfg.line_search,
                        discretize: cfg.discretize,
                        execution: Execution::Sequential,
                    };
                    one_step_estimate(&x, &target.densities, &opts)
                        .map(|r| (squared_error(r.l_hat.matrix(), truth), r.cross_info.fallback_count()))
                        .map_err(|e| e.to_string())
                });
                (res, start.elapsed().as_secs_f64())
            }
        };
        let row = match result {
            Ok((se, fallbacks)) => EstimationRow { replication: m, estimator: label, squared_error: Some(se), fallbacks, error: None },
            Err(e) => EstimationRow { replication: m, estimator: label, squared_error: None, fallbacks: 0, error: Some(e) },
        };
        out.push((row, seconds));
    }
    out
}

/// For each replication: simulate, fit every configured estimator and
/// record its squared error `Σ_{r≠s}(L̂_rs - L_rs)²`. Fails when more than
/// 10% of the runs fail.
pub fn run_estimation_campaign(cfg: &SimulationConfig) -> Result<EstimationCampaign> {
    cfg.validate()?;
    let estimators = cfg.estimators();
    let per_rep = cfg.execution.map(cfg.replications, |m| run_replication(cfg, &estimators, m));
    let (rows, seconds): (Vec<_>, Vec<_>) = per_rep.into_iter().flatten().unzip();
    let summaries = estimators
        .iter()
        .map(|e| {
            let label = e.label();
            let mine: Vec<&EstimationRow> = rows.iter().filter(|r| r.estimator == label).collect();
            summarize(&label, &mine)
        })
        .collect();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    check_failures(failed, rows.len())?;
    Ok(EstimationCampaign { config_echo: cfg.echo(), rows, seconds, summaries })
}

/// Settings of a size/power campaign on top of a [`SimulationConfig`]
/// (which supplies `g`, `n`, replications, seed and execution policy).
#[derive(Debug, Clone, PartialEq)]
pub struct TestCampaignConfig {
    pub base: SimulationConfig,
    pub l0: MixingMatrix,
    pub target: DensitySpec,
    pub alpha: f64,
    /// Local alternative `L = L₀ + n^{-1/2} H`; `None` simulates the null.
    pub h: Option<Matrix>,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub replication: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub reject: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TestCampaign {
    pub config_echo: String,
    pub alpha: f64,
    pub rows: Vec<TestRow>,
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub std_error: f64,
    /// Asymptotic rejection probability (local power, or `alpha` under the null).
    pub theoretical: f64,
}

impl TestCampaign {
    /// Rejection rate at another level, from the stored p-values.
    pub fn rejection_rate_at(&self, alpha: f64) -> f64 {
        let ps: Vec<f64> = self.rows.iter().filter_map(|r| r.p_value).collect();
        ps.iter().filter(|&&p| p < alpha).count() as f64 / ps.len().max(1) as f64
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let echo = format!(
            "{}\nrejection_rate = {}\nstd_error = {}\ntheoretical = {}",
            self.config_echo, self.rejection_rate, self.std_error, self.theoretical
        );
        write_rows(&dir.join("test.csv"), &echo, &self.rows)
    }
}

pub fn run_test_campaign(cfg: &TestCampaignConfig) -> Result<TestCampaign> {
    let base = &cfg.base;
    base.validate()?;
    let p = base.dim();
    let f = &cfg.target.densities;
    let h = cfg.h.clone().unwrap_or_else(|| Matrix::zeros(p, p));
    let l_true = cfg.l0.matrix() + &h / (base.n as f64).sqrt();
    MixingMatrix::new(l_true.clone())?;
    let g = &base.model.densities;
    let theoretical = if cfg.h.is_some() { local_power(&cfg.l0, &h, f, g, cfg.alpha)? } else { cfg.alpha };
    let options = SimpleTestOptions { location: cfg.location.clone(), discretize: base.discretize };
    let rows = base.execution.map(base.replications, |m| {
        let x = replication_sample(base, &l_true, m);
        match test_simple(&x, &cfg.l0, f, cfg.alpha, &options) {
            Ok(r) => TestRow { replication: m, statistic: Some(r.statistic), p_value: Some(r.p_value), reject: Some(r.reject), error: None },
            Err(e) => TestRow { replication: m, statistic: None, p_value: None, reject: None, error: Some(e.to_string()) },
        }
    });
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    check_failures(failed, rows.len())?;
    let ok = rows.len() - failed;
    let rate = rows.iter().filter(|r| r.reject == Some(true)).count() as f64 / ok.max(1) as f64;
    let echo = format!(
        "{}\nl0 = {}\ntarget = {}\nalpha = {}\nh = {}",
        base.echo(),
        inline(cfg.l0.matrix()),
        cfg.target.densities,
        cfg.alpha,
        inline(&h)
    );
    Ok(TestCampaign {
        config_echo: echo,
        alpha: cfg.alpha,
        rows,
        rejection_rate: rate,
        std_error: (rate * (1.0 - rate) / ok.max(1) as f64).sqrt(),
        theoretical,
    })
}

fn inline(m: &Matrix) -> String {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub alpha: f64,
    pub power: f64,
}

/// Asymptotic power against `L₀ + n^{-1/2} H` at each level.
pub fn power_table(
    l0: &MixingMatrix,
    h: &Matrix,
    f: &ComponentDensities,
    g: &ComponentDensities,
    alphas: &[f64],
) -> Result<Vec<PowerRow>> {
    let spec = GammaStarSpec::theoretical(l0.clone(), f, g)?;
    alphas
        .iter()
        .map(|&alpha| Ok(PowerRow { alpha, power: local_power_with(l0, h, f, &spec, alpha)? }))
        .collect()
}

pub fn write_power_table(path: &Path, echo: &str, rows: &[PowerRow]) -> Result<()> {
    write_rows(path, echo, rows)
}

/// Name such as `gamma_12` with 1-based indices.
pub fn coefficient_name(flavor: Flavor, r: usize, s: usize) -> String {
    let f = match flavor {
        Flavor::Gamma => "gamma",
        Flavor::Rho => "rho",
    };
    format!("{f}_{}{}", r + 1, s + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub replication: usize,
    pub preliminary: String,
    pub coefficient: String,
    pub lambda: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub replication: usize,
    pub preliminary: String,
    pub coefficient: String,
    pub estimate: Option<f64>,
    pub fallback: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TraceCampaign {
    pub config_echo: String,
    pub points: Vec<TracePoint>,
    pub estimates: Vec<TraceEstimate>,
    /// `(coefficient, γ_rs(f,g) or ρ_rs(f,g))` from quadrature.
    pub theoretical: Vec<(String, f64)>,
}

impl TraceCampaign {
    /// Successful estimates of one coefficient.
    pub fn estimates_of(&self, coefficient: &str) -> Vec<f64> {
        self.estimates.iter().filter(|e| e.coefficient == coefficient).filter_map(|e| e.estimate).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("cross_info_trace.csv"), &self.config_echo, &self.points)?;
        write_rows(&dir.join("cross_info_estimates.csv"), &self.config_echo, &self.estimates)?;
        let prelims: Vec<String> = {
            let mut v: Vec<String> = self.estimates.iter().map(|e| e.preliminary.clone()).collect();
            v.dedup();
            v.sort();
            v.dedup();
            v
        };
        let panels: Vec<LinePanel> = self
            .theoretical
            .iter()
            .map(|(name, value)| {
                let mut series: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
                for pt in self.points.iter().filter(|p| &p.coefficient == name) {
                    let group = prelims.iter().position(|p| p == &pt.preliminary).unwrap_or(0);
                    match series.last_mut() {
                        Some((g, pts)) if *g == group && pts.last().is_some_and(|l| l.0 < pt.lambda) => pts.push((pt.lambda, pt.h)),
                        _ => series.push((group, vec![(pt.lambda, pt.h)])),
                    }
                }
                LinePanel { title: format!("h for {name}"), series, reference_x: Some(1.0 / value) }
            })
            .collect();
        std::fs::write(dir.join("cross_info_trace.svg"), line_grid(&panels))?;
        Ok(())
    }
}

/// Line-search traces of `h(λ)` for every coefficient, replication and
/// configured preliminary, with `θ̃ = (L̃ Med[L̃⁻¹X], L̃)`.
pub fn run_cross_info_trace(cfg: &SimulationConfig, target: &DensitySpec) -> Result<TraceCampaign> {
    cfg.validate()?;
    let f = &target.densities;
    let g = &cfg.model.densities;
    let theory = cross_info_matrices(f, g)?;
    let p = cfg.dim();
    let mut theoretical = Vec::new();
    for r in 0..p {
        for s in (0..p).filter(|&s| s != r) {
            theoretical.push((coefficient_name(Flavor::Gamma, r, s), theory.gamma[(r, s)]));
            theoretical.push((coefficient_name(Flavor::Rho, r, s), theory.rho[(r, s)]));
        }
    }
    let per_rep = cfg.execution.map(cfg.replications, |m| {
        let x = replication_sample(cfg, cfg.l_true.matrix(), m);
        let mut points = Vec::new();
        let mut estimates = Vec::new();
        for &kind in &cfg.preliminaries {
            let fitted = fit_preliminary(kind, &x, cfg.master_seed, m).and_then(|l| {
                let mu = location_median(&x, &l)?;
                let theta = ThetaParam::new(mu, l)?;
                estimate_cross_info(&x, &theta, f, &cfg.line_search, Execution::Sequential)
            });
            match fitted {
                Ok(est) => {
                    for tr in &est.traces {
                        let name = coefficient_name(tr.flavor, tr.r, tr.s);
                        for (&lambda, &h) in tr.lambdas.iter().zip(&tr.h) {
                            points.push(TracePoint { replication: m, preliminary: kind.name().into(), coefficient: name.clone(), lambda, h });
                        }
                        estimates.push(TraceEstimate {
                            replication: m,
                            preliminary: kind.name().into(),
                            coefficient: name,
                            estimate: Some(tr.estimate),
                            fallback: tr.fallback,
                            error: None,
                        });
                    }
                }
                Err(e) => {
                    for (name, _) in &theoretical {
                        estimates.push(TraceEstimate {
                            replication: m,
                            preliminary: kind.name().into(),
                            coefficient: name.clone(),
                            estimate: None,
                            fallback: false,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
        }
        (points, estimates)
    });
    let (points, estimates): (Vec<_>, Vec<_>) = per_rep.into_iter().unzip();
    let estimates: Vec<TraceEstimate> = estimates.into_iter().flatten().collect();
    let failed = estimates.iter().filter(|e| e.error.is_some()).count();
    check_failures(failed, estimates.len())?;
    Ok(TraceCampaign {
        config_echo: format!("{}\ntrace_target = {}", cfg.echo(), f),
        points: points.into_iter().flatten().collect(),
        estimates,
        theoretical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Setup;

    fn tiny(n: usize, m: usize) -> SimulationConfig {
        let mut cfg = SimulationConfig::for_setup(Setup::Setup1, n);
        cfg.replications = m;
        cfg.targets.truncate(1);
        cfg.preliminaries = vec![PreliminaryKind::Fobi];
        cfg.execution = Execution::Sequential;
        cfg
    }

    #[test]
    fn sample_applies_mixing_and_location() {
        let g: ComponentDensities = "gaussian,gaussian".parse::<ComponentDensities>().unwrap();
        let l = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let mu = Vector::from_vec(vec![3.0, -1.0]);
        let mut rng = replication_rng(5, 0, DATA_STREAM);
        let x = generate_sample(&g, &l, &mu, 20000, &mut rng);
        let mean = x.row_mean();
        assert!((mean[0] - 3.0).abs() < 0.05 && (mean[1] + 1.0).abs() < 0.05);
        let c = x.column(0) - Vector::repeat(20000, mean[0]);
        let var0 = c.dot(&c) / 20000.0;
        assert!((var0 - 1.25).abs() < 0.05, "{var0}");
    }

    #[test]
    fn failure_threshold_is_ten_percent() {
        assert!(check_failures(1, 10).is_ok());
        assert!(matches!(check_failures(2, 10), Err(Error::TooManyFailures { failed: 2, total: 10 })));
    }

    #[test]
    fn estimation_rows_round_trip_through_csv() {
        let cfg = tiny(300, 2);
        let run = run_estimation_campaign(&cfg).unwrap();
        assert_eq!(run.rows.len(), 2 * cfg.estimators().len());
        let dir = tempfile::tempdir().unwrap();
        run.write(dir.path(), "setup1").unwrap();
        let back: Vec<EstimationRow> = read_rows(&dir.path().join("estimation.csv")).unwrap();
        assert_eq!(back, run.rows);
        let text = std::fs::read_to_string(dir.path().join("estimation.csv")).unwrap();
        assert!(text.starts_with("# model = "));
        assert!(text.contains("# seed = 1"));
    }

    #[test]
    fn coefficient_names_are_one_based() {
        assert_eq!(coefficient_name(Flavor::Gamma, 0, 1), "gamma_12");
        assert_eq!(coefficient_name(Flavor::Rho, 1, 0), "rho_21");
    }
}
