//! Scenario files, experiment runners and reproducible outputs.

pub mod rng;
pub mod run;
pub mod scenario;

pub use run::{check_experiment, error_code, exit_code, run_experiment, Summary};
pub use scenario::{parse_scenario, Experiment, Scenario};
