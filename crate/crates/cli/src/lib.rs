//! Scenario files, command implementations and artifact writers behind the `dsmf` binary.

pub mod commands;
pub mod output;
pub mod scenario_file;

pub use commands::{cmd_certify, cmd_run, cmd_verify, CmdError, RunSummary};
pub use scenario_file::{load_scenario, parse_scenario, reference_scenario, scenario_to_toml, LoadError, ScenarioFile};
