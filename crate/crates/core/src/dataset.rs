//! Turns snapshot series into flattened, labelled samples for the built-in
//! classifiers and for tensor export.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SnapshotSeries;
use crate::label::{label_series, Class, LabelConfig, LabelError};
use crate::learn::Dataset;
use crate::represent::{build, RepError, RepTensor, Scheme, WindowConfig};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("series has no provided labels for horizon {0}")]
    MissingLabels(usize),
    #[error("no complete window with a label")]
    Empty,
    #[error("scaler fitted on {expected} features, got {got}")]
    ScalerMismatch { expected: usize, got: usize },
    #[error("feature {0} is constant in the training data")]
    DegenerateFeature(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source", content = "horizon")]
pub enum LabelSource {
    /// Computed from mid-prices with the configured horizon and threshold.
    Computed,
    /// Read from the series' provided label column for this horizon.
    Provided(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub scheme: Scheme,
    pub window: WindowConfig,
    pub label: LabelConfig,
    pub label_source: LabelSource,
    /// Take every `stride`-th eligible window.
    pub stride: usize,
}

impl SampleSpec {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            window: WindowConfig::default(),
            label: LabelConfig::default(),
            label_source: LabelSource::Computed,
            stride: 1,
        }
    }

    /// Per-row width of the representation.
    pub fn row_width(&self, levels: usize) -> usize {
        match self.scheme {
            Scheme::LevelBased => 4 * levels,
            _ => self.window.width(),
        }
    }
}

/// Labels for every snapshot, `None` where the horizon runs past the end of
/// its trading day.
pub fn series_labels(series: &SnapshotSeries, spec: &SampleSpec) -> Result<Vec<Option<Class>>, DatasetError> {
    match spec.label_source {
        LabelSource::Provided(h) => {
            let col = series.provided_labels.get(&h).ok_or(DatasetError::MissingLabels(h))?;
            Ok(col.iter().map(|c| Some(*c)).collect())
        }
        LabelSource::Computed => {
            let mids = series.mids();
            let mut out = vec![None; series.len()];
            for (start, end) in series.days() {
                let ls = label_series(&mids[start..end], &spec.label)?;
                for (i, c) in ls.classes.into_iter().enumerate() {
                    out[start + i] = Some(c);
                }
            }
            Ok(out)
        }
    }
}

/// Snapshot positions that end a full window inside one day and carry a label.
pub fn sample_positions(series: &SnapshotSeries, labels: &[Option<Class>], spec: &SampleSpec) -> Vec<usize> {
    let n = spec.window.history;
    let stride = spec.stride.max(1);
    let mut out = Vec::new();
    for (start, end) in series.days() {
        if end - start < n {
            continue;
        }
        out.extend((start + n - 1..end).filter(|&t| labels[t].is_some()).step_by(stride));
    }
    out
}

/// Representation of the window ending at `t`.
pub fn window_tensor(series: &SnapshotSeries, t: usize, spec: &SampleSpec) -> Result<RepTensor, DatasetError> {
    let n = spec.window.history;
    let window = &series.snapshots[t + 1 - n..=t];
    Ok(build(spec.scheme, window, series.levels, &spec.window, series.tick_size)?)
}

/// Labelled samples, plus the snapshot index each one ends at.
#[derive(Debug, Clone)]
pub struct Samples {
    pub data: Dataset,
    pub positions: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
}

/// Builds samples from `series`, taking labels from `labels_from` (which must
/// be position-aligned). Perturbed test series pass their clean source here.
pub fn build_samples_with_labels(
    series: &SnapshotSeries,
    labels_from: &SnapshotSeries,
    spec: &SampleSpec,
) -> Result<Samples, DatasetError> {
    let labels = series_labels(labels_from, spec)?;
    let positions = sample_positions(labels_from, &labels, spec);
    if positions.is_empty() {
        return Err(DatasetError::Empty);
    }
    let rows = spec.window.history;
    let cols = spec.row_width(series.levels);
    let dim = rows * cols;
    let mut inputs = Vec::with_capacity(positions.len() * dim);
    let mut ys = Vec::with_capacity(positions.len());
    for &t in &positions {
        let tensor = window_tensor(series, t, spec)?;
        inputs.extend_from_slice(&tensor.data);
        ys.push(labels[t].expect("position has a label").index());
    }
    Ok(Samples { data: Dataset { dim, inputs, labels: ys }, positions, rows, cols })
}

pub fn build_samples(series: &SnapshotSeries, spec: &SampleSpec) -> Result<Samples, DatasetError> {
    build_samples_with_labels(series, series, spec)
}

/// Feature scaling fitted on training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureScaler {
    Identity { dim: usize },
    /// Per-feature z-score.
    Columnwise { mean: Vec<f64>, std: Vec<f64> },
    /// One divisor for every cell; keeps zero cells at zero.
    Scalar { dim: usize, scale: f64 },
}

impl FeatureScaler {
    /// Level-based inputs get a per-feature z-score; the moving-window family
    /// is divided by the standard deviation of all training cells.
    pub fn fit(scheme: Scheme, data: &Dataset) -> Result<Self, DatasetError> {
        if data.is_empty() {
            return Err(DatasetError::Empty);
        }
        let n = data.len() as f64;
        if scheme.is_moving_window() {
            let cells = data.inputs.len() as f64;
            let mean = data.inputs.iter().sum::<f64>() / cells;
            let var = data.inputs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cells;
            let scale = var.sqrt();
            if !(scale > 0.0) {
                return Err(DatasetError::DegenerateFeature(0));
            }
            return Ok(FeatureScaler::Scalar { dim: data.dim, scale });
        }
        let mut mean = vec![0.0; data.dim];
        for row in data.inputs.chunks_exact(data.dim) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; data.dim];
        for row in data.inputs.chunks_exact(data.dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        if let Some(j) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(DatasetError::DegenerateFeature(j));
        }
        Ok(FeatureScaler::Columnwise { mean, std })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureScaler::Identity { dim } | FeatureScaler::Scalar { dim, .. } => *dim,
            FeatureScaler::Columnwise { mean, .. } => mean.len(),
        }
    }

    pub fn apply(&self, data: &mut Dataset) -> Result<(), DatasetError> {
        if data.dim != self.dim() {
            return Err(DatasetError::ScalerMismatch { expected: self.dim(), got: data.dim });
        }
        match self {
            FeatureScaler::Identity { .. } => {}
            FeatureScaler::Scalar { scale, .. } => data.inputs.iter_mut().for_each(|v| *v /= scale),
            FeatureScaler::Columnwise { mean, std } => {
                for row in data.inputs.chunks_exact_mut(data.dim) {
                    for ((v, m), s) in row.iter_mut().zip(mean).zip(std) {
                        *v = (*v - m) / s;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::{Level, LevelSnapshot};

    fn series(mids: &[i64], days: Vec<usize>) -> SnapshotSeries {
        let snaps = mids
            .iter()
            .enumerate()
            .map(|(i, m)| LevelSnapshot {
                index: i as u64,
                asks: (0..2).map(|j| Level::new((m + 1 + j) as f64 * 0.01, 10.0 + j as f64)).collect(),
                bids: (0..2).map(|j| Level::new((m - 1 - j) as f64 * 0.01, 20.0)).collect(),
            })
            .collect();
        let mut s = SnapshotSeries::new(snaps, 2, 0.01, 1);
        s.day_starts = days;
        s
    }

    fn spec(scheme: Scheme) -> SampleSpec {
        let mut s = SampleSpec::new(scheme);
        s.window = WindowConfig { history: 3, half_width: 4, ..WindowConfig::default() };
        s.label = LabelConfig { horizon: 2, alpha: 0.0005 };
        s
    }

    #[test]
    fn positions_respect_days_and_horizon() {
        let s = series(&[1000; 12], vec![0, 6]);
        let sp = spec(Scheme::Mw);
        let labels = series_labels(&s, &sp).unwrap();
        // each day of 6 labels positions 0..4; windows need t >= start + 2
        assert_eq!(sample_positions(&s, &labels, &sp), vec![2, 3, 8, 9]);
        let samples = build_samples(&s, &sp).unwrap();
        assert_eq!((samples.rows, samples.cols, samples.data.dim), (3, 9, 27));
        assert_eq!(samples.data.len(), 4);
    }

    #[test]
    fn labels_follow_mids() {
        let s = series(&[1000, 1000, 1000, 1010, 1010, 1010, 1010], vec![0]);
        let sp = spec(Scheme::LevelBased);
        let samples = build_samples(&s, &sp).unwrap();
        assert_eq!(samples.positions, vec![2, 3, 4]);
        assert_eq!(samples.data.labels, vec![Class::Up.index(), Class::Stationary.index(), Class::Stationary.index()]);
        assert_eq!(samples.data.dim, 3 * 8);
    }

    #[test]
    fn scalers() {
        let d = Dataset { dim: 2, inputs: vec![1.0, 0.0, 3.0, 4.0], labels: vec![0, 1] };
        let col = FeatureScaler::fit(Scheme::LevelBased, &d).unwrap();
        let mut x = d.clone();
        col.apply(&mut x).unwrap();
        assert_eq!(x.inputs, vec![-1.0, -1.0, 1.0, 1.0]);

        let sc = FeatureScaler::fit(Scheme::Mw, &d).unwrap();
        let mut x = d.clone();
        sc.apply(&mut x).unwrap();
        // cells 1, 0, 3, 4: mean 2, population std sqrt(2.5)
        assert!((x.inputs[2] - 3.0 / 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(x.inputs[1], 0.0);

        let flat = Dataset { dim: 2, inputs: vec![1.0, 5.0, 1.0, 6.0], labels: vec![0, 1] };
        assert!(matches!(FeatureScaler::fit(Scheme::LevelBased, &flat), Err(DatasetError::DegenerateFeature(0))));
    }
}
