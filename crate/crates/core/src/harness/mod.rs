//! Seeded experiment runs, metric aggregation and sweeps.

pub mod metrics;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use metrics::{
    aggregate_seeds, mode_fraction_series, per_bandwidth_compliance, BandwidthBucket, MetricsRecord, SeedSummary,
    Stat, TimingRecord, SCHEMA_VERSION,
};
pub use run::{run_experiment, run_scenario, run_seeds, write_run, DecisionRow, RunResult};
pub use scenario::{ProfileSpec, ScenarioSpec, DEFAULT_SEEDS};
pub use sweep::{sweep, SweepFactor, SweepGrid, SweepRow};
