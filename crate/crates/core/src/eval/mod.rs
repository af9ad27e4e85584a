//! Metrics, the experiment grid and model checkpoints.

mod checkpoint;
mod grid;
mod metrics;

pub use checkpoint::Checkpoint;
pub use grid::{
    mean_std, run_grid, summarize, ExperimentConfig, GridData, GridReport, MeanStd, ResultRow, SummaryRow,
    RESULTS_HEADER,
};
pub use metrics::{metrics, metrics_from_indices, ConfusionMatrix, Metrics, MetricsError};
