//! Experiment harness for the hierarchical slice auction: deterministic
//! scenario generation, scheme execution across seeds, metric aggregation,
//! and CSV/plot-data emission. The `slice-auction` binary is a thin front
//! end over this library.

pub mod config;
pub mod experiment;
pub mod rng;
pub mod scenario;

pub use config::{ExperimentConfig, ScenarioTemplate, Scheme};
pub use experiment::{run_experiment, run_scheme, sweep_mvno_count, ResultRow, ResultTable, RowKind};
pub use rng::SplitMix64;
pub use scenario::{generate_scenario, generate_scenario_partitioned, scenario_for_scheme};
