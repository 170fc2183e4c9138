//! Scenario loading, batch and comparison runs, and the live control server
//! for the CTI/PON simulator.

pub mod compare;
pub mod engine;
pub mod live;
pub mod scenario;

pub use compare::{compare, ComparisonReport, MetricDelta};
pub use engine::{run_scenario, EngineError, EngineOptions, RunOutput, Simulation};
pub use scenario::{load_scenario, ScenarioConfig, ScenarioError};
