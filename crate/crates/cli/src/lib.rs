//! Command-line harness: per-verb executors, built-in targets and the
//! experiment-suite runner.

pub mod commands;
pub mod suite;
pub mod targets;

pub use commands::{execute, verify_net, Cli, Command, Globals, Outcome, Stats};
pub use suite::{run_suite, run_suite_config, ExperimentConfig, SuiteConfig, SuiteError, SuiteReport, SuiteRow};
pub use targets::target_values;
