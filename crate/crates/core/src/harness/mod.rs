//! Experiment front end: configuration, commands and CSV reports.

mod commands;
mod config;
mod report;

pub use commands::{
    cmd_ga_tune, cmd_generalize, cmd_sweep, cmd_train, evaluate, grid_cells, load_model,
    parse_grid, sweep, train_agent, tune_for, Axis, Cell, Policy, TrainArtifacts, Tuner,
    GA_BEST_FILE, GA_TRACE_FILE, GENERALIZE_FILE, MODEL_FILE, REWARDS_FILE, SWEEP_FILE,
};
pub use config::{Mode, RunConfig, KNOWN_KEYS};
pub use report::{
    load_csv, read_csv, reward_rows, save_csv, write_csv, CsvRow, EvalRow, GaBestRow, GaTraceRow,
    RewardRow,
};
