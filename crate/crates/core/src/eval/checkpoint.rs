use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::ExperimentConfig;
use super::metrics::{metrics_from_indices, Metrics};
use crate::dataset::{build_samples_with_labels, FeatureScaler, SampleSpec};
use crate::ingest::SnapshotSeries;
use crate::label::Class;
use crate::learn::{train, Model, ModelKind, ModelSpec};
use crate::represent::Scheme;
use crate::tensor::{Sidecar, Tensor, TensorData};
use crate::Error;

/// A trained model together with everything needed to rebuild its inputs.
/// Stored as an f64 rank-1 parameter tensor plus a sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub scaler: FeatureScaler,
    pub sample: SampleSpec,
    pub levels: usize,
    pub tick_size: f64,
}

#[derive(Serialize, Deserialize)]
struct Extra {
    model: ModelSpec,
    scaler: FeatureScaler,
    sample: SampleSpec,
}

impl Checkpoint {
    /// Trains one grid cell's model on `series`, exactly as [`run_grid`](super::run_grid) does.
    pub fn fit(
        series: &SnapshotSeries,
        cfg: &ExperimentConfig,
        model: ModelKind,
        scheme: Scheme,
        seed: u64,
    ) -> Result<Self, Error> {
        cfg.window.validate()?;
        let sample = cfg.sample_spec(scheme, cfg.train_stride);
        let all = build_samples_with_labels(series, series, &sample)?.data;
        let (mut tr, mut val) = all.split_tail(cfg.val_fraction);
        let scaler = FeatureScaler::fit(scheme, &tr)?;
        scaler.apply(&mut tr)?;
        if !val.is_empty() {
            scaler.apply(&mut val)?;
        }
        let outcome = train(ModelSpec::of_kind(model, tr.dim, seed), &tr, &val, &cfg.train)?;
        Ok(Self {
            model: outcome.model,
            scaler,
            sample: cfg.sample_spec(scheme, cfg.test_stride),
            levels: series.levels,
            tick_size: series.tick_size,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        let params = self.model.params();
        Tensor::new(vec![params.len()], TensorData::F64(params))?.write(path)?;
        let extra = Extra { model: self.model.spec.clone(), scaler: self.scaler.clone(), sample: self.sample.clone() };
        Sidecar {
            kind: "checkpoint".into(),
            scheme: Some(self.sample.scheme.name().into()),
            levels: Some(self.levels),
            tick_size: Some(self.tick_size),
            window: Some(self.sample.window),
            label: Some(self.sample.label),
            classes: Class::ALL.iter().map(|c| c.name().to_string()).collect(),
            extra: serde_json::to_value(extra)?,
            ..Default::default()
        }
        .write(path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let sidecar = Sidecar::read(path)?;
        if sidecar.kind != "checkpoint" {
            return Err(Error::Config(format!("{} is a {} tensor, not a checkpoint", path.display(), sidecar.kind)));
        }
        let extra: Extra = serde_json::from_value(sidecar.extra)?;
        let mut model = Model::zeros(extra.model)?;
        model.set_params(&Tensor::read(path)?.data.to_f64())?;
        Ok(Self {
            model,
            scaler: extra.scaler,
            sample: extra.sample,
            levels: sidecar.levels.unwrap_or(0),
            tick_size: sidecar.tick_size.unwrap_or(0.0),
        })
    }

    /// Scores the model on `series`, with labels from the aligned `labels_from`.
    pub fn evaluate(&self, series: &SnapshotSeries, labels_from: &SnapshotSeries) -> Result<Metrics, Error> {
        let mut d = build_samples_with_labels(series, labels_from, &self.sample)?.data;
        self.scaler.apply(&mut d)?;
        let pred = self.model.predict(&d.inputs)?;
        Ok(metrics_from_indices(&d.labels, &pred, Class::ALL.len()))
    }
}
