//! Monte Carlo campaigns reproducing the simulation study at desk scale,
//! with seeded, schedule-independent replications and CSV/SVG output.

pub mod campaign;
pub mod config;
pub mod rng;
pub mod svg;

pub use campaign::{
    coefficient_name, generate_sample, power_table, read_rows, replication_sample, run_cross_info_trace,
    run_estimation_campaign, run_test_campaign, write_power_table, EstimationCampaign, EstimationRow,
    EstimatorSummary, PowerRow, TestCampaign, TestCampaignConfig, TestRow, TraceCampaign, TraceEstimate,
    TracePoint,
};
pub use config::{
    parse_config_text, parse_inline_matrix, read_config_file, DensitySpec, EstimatorSpec, PreliminaryKind, Setup,
    SimulationConfig, DESK_REPLICATIONS, PAPER_REPLICATIONS,
};
pub use rng::{derived_seed, replication_rng};
