//! Scenario runner, randomized battery and report writer for `bergman-core`.

pub mod battery;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{Check, ScenarioConfig};
pub use error::HarnessError;
pub use report::{emit_report, Format, RunReport};
pub use runner::{run_scenario, run_scenarios};
