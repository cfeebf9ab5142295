//! Experiment grid over classifier x augmentation x noise kind x strength,
//! with the noisy-train / clean-test protocol and report files.

mod config;
mod grid;
mod report;

pub use config::{
    Architectures, AugmentConfig, DatasetSource, GridConfig, LinearNoiseConfig, NoiseGrid, WindowConfig,
};
pub use grid::{
    checksum_windows, distinct_runs, grid_cells, load_source, prepare, run_cell, run_cell_prepared, run_cell_with_model, run_grid,
    sort_results, Cell, CellFailure, CellResult, GridRun, Prepared,
};
pub use report::{
    render_curves, render_table, report, trends, write_run_file, ClassifierTrend, CurveTrend, Decisions,
    ReportPaths, RunFile, Trends, RUN_FORMAT,
};
