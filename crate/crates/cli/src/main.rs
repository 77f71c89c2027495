//! `icarank` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure (a `diagnostic.json` is written to the output
//! directory).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use icarank::harness::{
    parse_inline_matrix, power_table, read_config_file, run_cross_info_trace, run_estimation_campaign,
    run_test_campaign, write_power_table, DensitySpec, Setup, SimulationConfig, TestCampaignConfig,
    DESK_REPLICATIONS, PAPER_REPLICATIONS,
};
use icarank::io::read_matrix;
use icarank::par::configure_threads;
use icarank::{
    one_step_estimate, test_linear, test_simple, Error, Execution, LinearHypothesis, LineSearchOptions, Location,
    Matrix, MixingMatrix, OneStepOptions, Preliminary, SimpleTestOptions,
};

#[derive(Parser, Debug)]
#[command(name = "icarank", version, about = "Signed-rank tests and R-estimation for symmetric ICA mixing matrices")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replication-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run replications sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    /// `key = value` configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving CSV, SVG and JSON outputs.
    #[arg(long, global = true, default_value = "icarank-out")]
    out_dir: PathBuf,
    /// Use the full replication count of the published study (slow).
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Squared-error campaign for preliminary and one-step R-estimators.
    SimulateEstimation(SimArgs),
    /// Empirical size or local power of the simple signed-rank test.
    SimulateTest(SimTestArgs),
    /// One-step R-estimate of the mixing matrix from a CSV data file.
    Estimate(EstimateArgs),
    /// Signed-rank test of a simple or linear hypothesis on a CSV data file.
    Test(TestArgs),
    /// Asymptotic local power of the simple test at several levels.
    Power(PowerArgs),
    /// Line-search traces of the cross-information estimates.
    CrossInfoTrace(TraceArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Generating density: setup1, setup2, setup3 or a list such as `t:8,logistic`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short = 'm')]
    replications: Option<usize>,
    /// Target densities separated by `;`.
    #[arg(long)]
    targets: Option<String>,
    /// Preliminary estimators for the R-estimators, e.g. `fobi,fastica`.
    #[arg(long)]
    preliminaries: Option<String>,
    /// Preliminary estimators reported on their own.
    #[arg(long)]
    competitors: Option<String>,
    /// Line-search grid constant.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Discretization grid constant, or `off`.
    #[arg(long)]
    discretize: Option<String>,
    /// True mixing matrix, rows separated by `;`.
    #[arg(long)]
    l_true: Option<String>,
    #[arg(long)]
    mu_true: Option<String>,
}

impl SimArgs {
    fn entries(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.insert(k.to_string(), v);
            }
        };
        put("model", self.model.clone());
        put("n", self.n.map(|v| v.to_string()));
        put("replications", self.replications.map(|v| v.to_string()));
        put("targets", self.targets.clone());
        put("preliminaries", self.preliminaries.clone());
        put("competitors", self.competitors.clone());
        put("c", self.c.map(|v| v.to_string()));
        put("lambda_max", self.lambda_max.map(|v| v.to_string()));
        put("discretize", self.discretize.clone());
        put("l_true", self.l_true.clone());
        put("mu_true", self.mu_true.clone());
        out
    }
}

#[derive(Args, Debug)]
struct SimTestArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Null mixing matrix `L₀` (CSV file or inline); identity by default.
    #[arg(long)]
    l0: Option<String>,
    /// Target density of the test; defaults to the generating density.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Local alternative direction `H` (CSV file or inline); data come
    /// from `L₀ + H/√n`.
    #[arg(long)]
    h: Option<String>,
    #[arg(long, default_value = "median")]
    location: String,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// CSV file with one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// Target densities, e.g. `setup1` or `t:8,t:5`.
    #[arg(long)]
    target: String,
    /// fobi or fastica.
    #[arg(long, default_value = "fobi")]
    preliminary: String,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    discretize: Option<f64>,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Null mixing matrix `L₀` (CSV file or inline); identity by default.
    #[arg(long)]
    l0: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// CSV file holding `Ω` (p(p-1) rows); switches to the linear hypothesis.
    #[arg(long)]
    omega: Option<PathBuf>,
    /// Preliminary estimator behind the constrained estimate (linear test).
    #[arg(long, default_value = "fobi")]
    preliminary: String,
    #[arg(long, default_value = "median")]
    location: String,
    #[arg(long)]
    discretize: Option<f64>,
}

#[derive(Args, Debug)]
struct PowerArgs {
    /// Target density `f`.
    #[arg(long)]
    target: String,
    /// Generating density `g`; defaults to `f`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l0: Option<String>,
    /// Local alternative direction `H` (CSV file or inline).
    #[arg(long)]
    h: String,
    /// Comma-separated levels.
    #[arg(long, default_value = "0.01,0.05,0.1")]
    alphas: String,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Target density whose cross-information coefficients are traced;
    /// defaults to the generating density. Replications default to 50.
    #[arg(long)]
    target: Option<String>,
}

/// Configuration or argument error (exit code 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Library errors in user-supplied values become usage errors.
fn arg<T>(what: &str, r: icarank::Result<T>) -> Result<T> {
    r.map_err(|e| usage(format!("invalid {what}: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out_dir = cli.global.out_dir.clone();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = exit_code(&err);
            if code == 3 {
                write_diagnostic(&out_dir, &err);
            }
            ExitCode::from(code)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Singular { .. }
            | Error::Identifiability { .. }
            | Error::DegenerateStatistic { .. }
            | Error::DegeneratePair { .. }
            | Error::NonConvergence { .. }
            | Error::TooManyFailures { .. },
        ) => 3,
        Some(Error::Domain(_)) => 1,
        _ => 2,
    }
}

fn write_diagnostic(dir: &Path, err: &anyhow::Error) {
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    let body = json!({ "error": err.to_string(), "chain": chain, "debug": format!("{err:?}") });
    let path = dir.join("diagnostic.json");
    if std::fs::create_dir_all(dir).is_ok() && std::fs::write(&path, body.to_string()).is_ok() {
        eprintln!("diagnostic written to {}", path.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        configure_threads(t).map_err(usage)?;
    }
    match &cli.command {
        Command::SimulateEstimation(a) => simulate_estimation(g, a),
        Command::SimulateTest(a) => simulate_test(g, a),
        Command::Estimate(a) => estimate(g, a),
        Command::Test(a) => test(g, a),
        Command::Power(a) => power(g, a),
        Command::CrossInfoTrace(a) => cross_info_trace(g, a),
    }
}

/// Defaults, then the config file, then flags, then global overrides.
fn simulation_config(g: &Global, sim: &SimArgs, default_n: usize, default_m: usize) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::for_setup(Setup::Setup1, default_n);
    cfg.replications = default_m;
    let mut entries = match &g.config {
        Some(path) => arg("configuration file", read_config_file(path))?,
        None => BTreeMap::new(),
    };
    let flags = sim.entries();
    let explicit_m = flags.contains_key("replications") || entries.contains_key("replications") || entries.contains_key("m");
    entries.extend(flags);
    if let Some(seed) = g.seed {
        entries.insert("seed".into(), seed.to_string());
    }
    // Model first so dimension-dependent keys apply on top of it.
    if let Some(model) = entries.get("model").or(entries.get("setup")).or(entries.get("g")).cloned() {
        arg("model", cfg.apply(&BTreeMap::from([("model".to_string(), model)])))?;
    }
    arg("configuration", cfg.apply(&entries))?;
    if g.paper_scale && !explicit_m {
        eprintln!(
            "warning: --paper-scale runs {PAPER_REPLICATIONS} replications per configuration; expect hours of compute"
        );
        cfg.replications = PAPER_REPLICATIONS;
    }
    if g.sequential {
        cfg.execution = Execution::Sequential;
    }
    arg("configuration", cfg.validate())?;
    Ok(cfg)
}

fn density(what: &str, s: &str) -> Result<DensitySpec> {
    arg(what, s.parse())
}

/// A CSV file path, or an inline matrix such as `1, 0.2; 0, 1`.
fn matrix_arg(what: &str, s: &str) -> Result<Matrix> {
    let path = Path::new(s);
    if path.is_file() {
        return read_matrix(path).with_context(|| format!("reading {what} from {}", path.display()));
    }
    arg(what, parse_inline_matrix(s))
}

fn square(what: &str, m: &Matrix, p: usize) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::Dimension { expected: format!("{what} of size {p} x {p}"), found: format!("{} x {}", m.nrows(), m.ncols()) }.into());
    }
    Ok(())
}

fn mixing(what: &str, s: Option<&str>, p: usize) -> Result<MixingMatrix> {
    match s {
        None => Ok(MixingMatrix::identity(p)),
        Some(s) => {
            let m = matrix_arg(what, s)?;
            square(what, &m, p)?;
            Ok(MixingMatrix::new(m)?)
        }
    }
}

fn location(s: &str) -> Result<Location> {
    match s {
        "median" => Ok(Location::Median),
        "mean" => Ok(Location::Mean),
        other => {
            let v: std::result::Result<Vec<f64>, _> = other.split(',').map(|x| x.trim().parse::<f64>()).collect();
            v.map(Location::Fixed).map_err(|_| usage(format!("invalid location '{other}' (median, mean or a list)")))
        }
    }
}

fn preliminary(s: &str, seed: u64) -> Result<Preliminary> {
    match s {
        "fobi" => Ok(Preliminary::Fobi),
        "fastica" => Ok(Preliminary::FastIca { seed }),
        other => Err(usage(format!("unknown preliminary '{other}' (fobi or fastica)"))),
    }
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(dir.join(name), &text)?;
    println!("{text}");
    Ok(())
}

fn load_data(path: &Path) -> Result<Matrix> {
    read_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn simulate_estimation(g: &Global, a: &SimArgs) -> Result<()> {
    let cfg = simulation_config(g, a, 4000, DESK_REPLICATIONS)?;
    let run = run_estimation_campaign(&cfg)?;
    run.write(&g.out_dir, &format!("{} (n = {})", cfg.model.label, cfg.n))?;
    println!("estimator,runs,failures,median,q1,q3");
    for s in &run.summaries {
        println!("{},{},{},{:e},{:e},{:e}", s.estimator, s.runs, s.failures, s.median, s.q1, s.q3);
    }
    eprintln!("wrote {}", g.out_dir.display());
    Ok(())
}

fn simulate_test(g: &Global, a: &SimTestArgs) -> Result<()> {
    let base = simulation_config(g, &a.sim, 800, DESK_REPLICATIONS)?;
    let p = base.dim();
    let target = match &a.target {
        Some(t) => density("target", t)?,
        None => base.model.clone(),
    };
    let h = a.h.as_deref().map(|s| matrix_arg("H", s)).transpose()?;
    if let Some(h) = &h {
        square("H", h, p)?;
    }
    let cfg = TestCampaignConfig {
        l0: mixing("L0", a.l0.as_deref(), p)?,
        target,
        alpha: a.alpha,
        h,
        location: location(&a.location)?,
        base,
    };
    let run = run_test_campaign(&cfg)?;
    run.write(&g.out_dir)?;
    println!("rejection_rate,std_error,theoretical");
    println!("{},{},{}", run.rejection_rate, run.std_error, run.theoretical);
    Ok(())
}

fn estimate(g: &Global, a: &EstimateArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(1);
    let f = density("target", &a.target)?;
    let x = load_data(&a.data)?;
    let defaults = LineSearchOptions::default();
    let opts = OneStepOptions {
        preliminary: preliminary(&a.preliminary, seed)?,
        line_search: LineSearchOptions { c: a.c.unwrap_or(defaults.c), lambda_max: a.lambda_max.unwrap_or(defaults.lambda_max) },
        discretize: a.discretize,
        execution: if g.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let res = one_step_estimate(&x, &f.densities, &opts)?;
    let config = json!({
        "command": "estimate",
        "data": a.data.display().to_string(),
        "target": f.densities.to_string(),
        "preliminary": a.preliminary,
        "c": opts.line_search.c,
        "lambda_max": opts.line_search.lambda_max,
        "discretize": a.discretize,
    });
    write_json(&g.out_dir, "estimate.json", &json!({ "seed": seed, "config": config, "result": res.record() }))
}

fn test(g: &Global, a: &TestArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(1);
    let f = density("target", &a.target)?;
    let p = f.densities.dim();
    let l0 = mixing("L0", a.l0.as_deref(), p)?;
    let x = load_data(&a.data)?;
    let report = match &a.omega {
        None => {
            let opts = SimpleTestOptions { location: location(&a.location)?, discretize: a.discretize };
            test_simple(&x, &l0, &f.densities, a.alpha, &opts)?
        }
        Some(path) => {
            let omega = read_matrix(path).with_context(|| format!("reading {}", path.display()))?;
            let hyp = LinearHypothesis::new(l0.clone(), omega)?;
            let opts = OneStepOptions { preliminary: preliminary(&a.preliminary, seed)?, ..OneStepOptions::default() };
            let unconstrained = one_step_estimate(&x, &f.densities, &opts)?;
            let constrained = hyp.constrained_estimate(&x, &unconstrained.l_hat)?;
            test_linear(&x, &hyp, &f.densities, a.alpha, &constrained)?
        }
    };
    let config = json!({
        "command": "test",
        "data": a.data.display().to_string(),
        "target": f.densities.to_string(),
        "l0": rows(l0.matrix()),
        "alpha": a.alpha,
        "omega": a.omega.as_ref().map(|p| p.display().to_string()),
        "location": a.location,
    });
    write_json(&g.out_dir, "test.json", &json!({ "seed": seed, "config": config, "result": report }))
}

fn power(g: &Global, a: &PowerArgs) -> Result<()> {
    let f = density("target", &a.target)?;
    let gd = match &a.model {
        Some(m) => density("model", m)?,
        None => f.clone(),
    };
    let p = f.densities.dim();
    let l0 = mixing("L0", a.l0.as_deref(), p)?;
    let h = matrix_arg("H", &a.h)?;
    square("H", &h, p)?;
    let alphas: Vec<f64> = a
        .alphas
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("invalid level '{s}'"))))
        .collect::<Result<_>>()?;
    let table = power_table(&l0, &h, &f.densities, &gd.densities, &alphas)?;
    let echo = format!(
        "target = {}\nmodel = {}\nl0 = {}\nh = {}\nseed = {}",
        f.densities,
        gd.densities,
        a.l0.as_deref().unwrap_or("identity"),
        a.h,
        g.seed.unwrap_or(1)
    );
    std::fs::create_dir_all(&g.out_dir)?;
    write_power_table(&g.out_dir.join("power.csv"), &echo, &table)?;
    println!("alpha,power");
    for r in &table {
        println!("{},{}", r.alpha, r.power);
    }
    Ok(())
}

fn cross_info_trace(g: &Global, a: &TraceArgs) -> Result<()> {
    let cfg = simulation_config(g, &a.sim, 4000, 50)?;
    let target = match &a.target {
        Some(t) => density("target", t)?,
        None => cfg.model.clone(),
    };
    let run = run_cross_info_trace(&cfg, &target)?;
    run.write(&g.out_dir)?;
    println!("coefficient,theoretical,median_estimate");
    for (name, value) in &run.theoretical {
        let mut est = run.estimates_of(name);
        est.sort_by(f64::total_cmp);
        let med = est.get(est.len() / 2).copied().unwrap_or(f64::NAN);
        println!("{name},{value},{med}");
    }
    Ok(())
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
