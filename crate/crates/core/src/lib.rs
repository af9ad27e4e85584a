//! Limit order book reconstruction, level-based and moving-window
//! representations, tick-filling perturbations, labels, built-in classifiers
//! and the robustness experiment grid.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod book;
pub mod dataset;
pub mod eval;
pub mod ingest;
pub mod io;
pub mod label;
pub mod learn;
pub mod perturb;
pub mod represent;
pub mod synth;
pub mod tensor;

pub use book::{mid_price, BookError, BookEvent, BookState, EventKind, Level, LevelSnapshot, Side, Tick};
pub use dataset::{FeatureScaler, LabelSource, SampleSpec};
pub use eval::{run_grid, Checkpoint, ExperimentConfig, GridData, GridReport, Metrics};
pub use ingest::{EventStream, IngestError, SnapshotSeries};
pub use label::{Class, LabelConfig};
pub use learn::{Model, ModelKind, ModelSpec, TrainConfig};
pub use perturb::{FillCap, Paradigm, PerturbationSpec};
pub use represent::{RepTensor, Scheme, WindowConfig};
pub use tensor::{Sidecar, Tensor, TensorData};

use thiserror::Error;

/// Any failure surfaced by the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Rep(#[from] represent::RepError),
    #[error(transparent)]
    Perturb(#[from] perturb::PerturbError),
    #[error(transparent)]
    Label(#[from] label::LabelError),
    #[error(transparent)]
    Learn(#[from] learn::LearnError),
    #[error(transparent)]
    Metrics(#[from] eval::MetricsError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// True for malformed input data, as opposed to runtime failures.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Error::Ingest(IngestError::MalformedRow { .. } | IngestError::InvalidSnapshot { .. } | IngestError::Book { .. })
        )
    }
}
