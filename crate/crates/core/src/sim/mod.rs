//! Deterministic scenario simulation.

pub mod channel;
pub mod compare;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod trace;

pub use compare::{compare_scenarios, Comparison, ComparisonRow, PairDelta};
pub use config::ScenarioConfig;
pub use engine::run_scenario;
pub use metrics::{compute_metrics, Metrics};
pub use trace::Trace;
