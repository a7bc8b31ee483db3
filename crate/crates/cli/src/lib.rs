//! Experiment harness around the `graphmix` library: dataset resolution,
//! experiment configs, reproduction grids, oracle checks, and analysis
//! artifacts. `main.rs` is a thin flag-parsing shell over this crate so the
//! acceptance tests can drive the same code paths in-process.

pub mod commands;
pub mod config;
pub mod data;
pub mod report;

pub use commands::{
    cmd_analyze, cmd_check_equivalence, cmd_make_bundle, cmd_reproduce_table, cmd_sweep_ratio,
    cmd_train, CliError,
};
pub use config::{ConfigFile, ExperimentConfig, FlagOverrides, SplitChoice};
pub use data::{apply_split, resolve_dataset, DatasetError};
pub use report::TableId;
