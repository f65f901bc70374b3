//! Experiment orchestration: scenario x beta x seed matrices over the HITL, rule-based
//! and MPC controllers, the override-cap sensitivity sweep, run metrics, a
//! content-addressed results store and report emission.

pub mod error;
pub mod metrics;
pub mod plan;
pub mod report;
pub mod runner;
pub mod store;

pub use error::{HarnessError, Result};
pub use metrics::{compute_metrics, mean, median, Distribution, MetricsSummary};
pub use plan::{
    digest, sim_config, Cell, ControllerKind, DataSource, DataSpec, ExperimentPlan, DEFAULT_BETAS,
    DEFAULT_P_MAX_GRID, DEFAULT_RUNS,
};
pub use report::{emit_report, read_results_csv, results_rows, ControllerAggregate, ReportFiles, ResultRow};
pub use runner::{
    curve_csv, evaluate, load_traces, prepare_data, run_matrix, sensitivity_sweep, split_forecasts, train_hitl,
    train_predictor, MatrixOutcome, PreparedData, SplitForecasts, ACTION_STREAM_OFFSET, VALIDATION_STREAM_OFFSET,
};
pub use store::{write_atomic, CellOutcome, CellResult, ResultsStore};
