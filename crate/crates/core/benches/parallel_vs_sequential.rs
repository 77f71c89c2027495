//! Sequential against rayon-backed execution for the two parallel loops:
//! the line searches of one estimate and the replications of a campaign.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use icarank::harness::{replication_sample, run_estimation_campaign, PreliminaryKind, Setup, SimulationConfig};
use icarank::{estimate_cross_info, fobi, location_median, Execution, LineSearchOptions, ThetaParam};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn line_searches(c: &mut Criterion) {
    let cfg = SimulationConfig::for_setup(Setup::Setup2, 2000);
    let x = replication_sample(&cfg, cfg.l_true.matrix(), 0);
    let l = fobi(&x).unwrap();
    let theta = ThetaParam::new(location_median(&x, &l).unwrap(), l).unwrap();
    let f = Setup::Setup2.densities();
    let opts = LineSearchOptions::default();
    let mut group = c.benchmark_group("line_searches_n2000");
    group.sample_size(10);
    for (name, policy) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &policy, |b, &policy| {
            b.iter(|| estimate_cross_info(&x, &theta, &f, &opts, policy).unwrap())
        });
    }
    group.finish();
}

fn campaign(c: &mut Criterion) {
    let mut cfg = SimulationConfig::for_setup(Setup::Setup3, 800);
    cfg.replications = 8;
    cfg.targets.truncate(1);
    cfg.preliminaries = vec![PreliminaryKind::Fobi];
    let mut group = c.benchmark_group("campaign_m8_n800");
    group.sample_size(10);
    for (name, policy) in POLICIES {
        let mut run_cfg = cfg.clone();
        run_cfg.execution = policy;
        group.bench_function(name, |b| b.iter(|| run_estimation_campaign(&run_cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, line_searches, campaign);
criterion_main!(benches);
