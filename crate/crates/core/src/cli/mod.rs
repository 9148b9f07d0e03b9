//! Command-line front end: experiment specs, the subcommands and their
//! CSV/JSON artifacts. Argument parsing lives in the binary.

mod commands;
mod output;
mod spec;

pub use commands::{
    cmd_ablate, cmd_analyze, cmd_certify, cmd_eval, cmd_train, cmd_verify_bounds, random_policy,
    run_all, Console, Outcome, Run,
};
pub use output::{strip_timestamp, write_atomic, write_csv, write_json, TIMESTAMP_PREFIX};
pub use spec::{AnalysisToggles, ExperimentSpec, Overrides};

/// Standalone plotting script written next to the training outputs.
pub const PLOT_SCRIPT: &str = include_str!("plot.py");
