use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics_from_indices, ConfusionMatrix, Metrics};
use crate::dataset::{build_samples_with_labels, FeatureScaler, LabelSource, SampleSpec};
use crate::ingest::{events_to_series, EventStream, SnapshotSeries};
use crate::io::write_atomic;
use crate::label::{Class, LabelConfig};
use crate::learn::{train, Dataset, ModelKind, ModelSpec, TrainConfig};
use crate::perturb::{perturb_event_stream, perturb_series, FillCap, Paradigm, PerturbationSpec};
use crate::represent::{Scheme, WindowConfig};
use crate::Error;

pub const RESULTS_HEADER: &str =
    "model,scheme,paradigm,seed,status,accuracy,precision,recall,f_score,cm_00,cm_01,cm_02,cm_10,cm_11,cm_12,cm_20,cm_21,cm_22";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub schemes: Vec<Scheme>,
    pub paradigms: Vec<Paradigm>,
    pub seeds: Vec<u64>,
    pub window: WindowConfig,
    pub label: LabelConfig,
    pub label_source: LabelSource,
    /// Sampling stride over training windows.
    pub train_stride: usize,
    /// Sampling stride over test windows.
    pub test_stride: usize,
    /// Chronological tail of the training windows held out for model selection.
    pub val_fraction: f64,
    pub train: TrainConfig,
    /// Injected order size in lots; `None` means the minimum order size.
    pub order_size: Option<u64>,
    pub fill_cap: FillCap,
    pub allow_truncation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::Linear, ModelKind::Mlp],
            schemes: Scheme::ALL.to_vec(),
            paradigms: Paradigm::ALL.to_vec(),
            seeds: (0..5).collect(),
            window: WindowConfig::default(),
            label: LabelConfig::default(),
            label_source: LabelSource::Computed,
            train_stride: 1,
            test_stride: 1,
            val_fraction: 0.1,
            train: TrainConfig::default(),
            order_size: None,
            fill_cap: FillCap::DeepestLevel,
            allow_truncation: false,
        }
    }
}

impl ExperimentConfig {
    pub fn perturbation(&self, paradigm: Paradigm) -> PerturbationSpec {
        PerturbationSpec {
            paradigm,
            order_size: self.order_size,
            fill_cap: self.fill_cap,
            allow_truncation: self.allow_truncation,
        }
    }

    pub fn sample_spec(&self, scheme: Scheme, stride: usize) -> SampleSpec {
        SampleSpec { scheme, window: self.window, label: self.label, label_source: self.label_source, stride }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.window.validate()?;
        if self.models.is_empty() || self.schemes.is_empty() || self.paradigms.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("grid needs at least one model, scheme, paradigm and seed".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Unperturbed training data and one test series per paradigm. Test labels
/// always come from `test_clean`.
#[derive(Debug, Clone)]
pub struct GridData {
    pub train: SnapshotSeries,
    pub test_clean: SnapshotSeries,
    pub tests: BTreeMap<Paradigm, SnapshotSeries>,
}

impl GridData {
    /// Perturbs snapshot-only test data.
    pub fn from_series(train: SnapshotSeries, test: SnapshotSeries, cfg: &ExperimentConfig) -> Result<Self, Error> {
        let tests = cfg
            .paradigms
            .iter()
            .map(|&p| Ok((p, perturb_series(&test, &cfg.perturbation(p))?)))
            .collect::<Result<_, Error>>()?;
        Ok(Self { train, test_clean: test, tests })
    }

    /// Replays event streams; perturbations see the full book.
    pub fn from_event_streams(
        train: &EventStream,
        test: &EventStream,
        levels: usize,
        cfg: &ExperimentConfig,
    ) -> Result<Self, Error> {
        let test_clean = events_to_series(test, levels)?;
        let tests = cfg
            .paradigms
            .iter()
            .map(|&p| Ok((p, perturb_event_stream(test, &cfg.perturbation(p), levels)?)))
            .collect::<Result<_, Error>>()?;
        Ok(Self { train: events_to_series(train, levels)?, test_clean, tests })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: ModelKind,
    pub scheme: Scheme,
    pub paradigm: Paradigm,
    pub seed: u64,
    /// `None` marks a failed cell; `error` then says why.
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn status(&self) -> &'static str {
        if self.metrics.is_some() {
            "ok"
        } else {
            "failed"
        }
    }

    pub fn csv_line(&self) -> String {
        let head = format!(
            "{},{},{},{},{}",
            self.model.name(),
            self.scheme.name(),
            self.paradigm.name(),
            self.seed,
            self.status()
        );
        match &self.metrics {
            Some(m) => {
                let cm: Vec<String> = m.confusion.counts.iter().map(u64::to_string).collect();
                format!("{head},{:.6},{:.6},{:.6},{:.6},{}", m.accuracy, m.precision, m.recall, m.f_score, cm.join(","))
            }
            None => format!("{head}{}", ",".repeat(13)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Sample standard deviation; zero for a single value.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd { mean: f64::NAN, std: f64::NAN };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub scheme: Scheme,
    pub paradigm: Paradigm,
    pub runs: usize,
    pub failed: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f_score: MeanStd,
    /// Summed over successful seeds.
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

struct SchemeData {
    train: Dataset,
    val: Dataset,
    tests: BTreeMap<Paradigm, Dataset>,
}

fn prepare_scheme(data: &GridData, cfg: &ExperimentConfig, scheme: Scheme) -> Result<SchemeData, Error> {
    let train_spec = cfg.sample_spec(scheme, cfg.train_stride);
    let all = build_samples_with_labels(&data.train, &data.train, &train_spec)?.data;
    let (mut train, mut val) = all.split_tail(cfg.val_fraction);
    let scaler = FeatureScaler::fit(scheme, &train)?;
    scaler.apply(&mut train)?;
    if !val.is_empty() {
        scaler.apply(&mut val)?;
    }
    let test_spec = cfg.sample_spec(scheme, cfg.test_stride);
    let mut tests = BTreeMap::new();
    for &p in &cfg.paradigms {
        let series = data.tests.get(&p).ok_or_else(|| Error::Config(format!("no test series for {}", p.name())))?;
        let mut d = build_samples_with_labels(series, &data.test_clean, &test_spec)?.data;
        scaler.apply(&mut d)?;
        tests.insert(p, d);
    }
    Ok(SchemeData { train, val, tests })
}

fn run_cell(sd: &SchemeData, cfg: &ExperimentConfig, model: ModelKind, seed: u64) -> Result<Vec<Metrics>, Error> {
    let spec = ModelSpec::of_kind(model, sd.train.dim, seed);
    let outcome = train(spec, &sd.train, &sd.val, &cfg.train)?;
    cfg.paradigms
        .iter()
        .map(|p| {
            let d = &sd.tests[p];
            let pred = outcome.model.predict(&d.inputs)?;
            Ok(metrics_from_indices(&d.labels, &pred, Class::ALL.len()))
        })
        .collect()
}

/// Trains each (model, scheme, seed) on unperturbed data and tests it under
/// every paradigm. Cells run in parallel; failures become marked rows.
pub fn run_grid(cfg: &ExperimentConfig, data: &GridData) -> Result<GridReport, Error> {
    cfg.validate()?;
    let prepared: Vec<(Scheme, Result<SchemeData, String>)> = cfg
        .schemes
        .par_iter()
        .map(|&s| (s, prepare_scheme(data, cfg, s).map_err(|e| e.to_string())))
        .collect();

    let mut cells = Vec::new();
    for &m in &cfg.models {
        for (s, sd) in &prepared {
            for &seed in &cfg.seeds {
                cells.push((m, *s, sd, seed));
            }
        }
    }
    let outcomes: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(model, scheme, sd, seed)| {
            let result = match sd {
                Ok(sd) => run_cell(sd, cfg, model, seed).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            cfg.paradigms
                .iter()
                .enumerate()
                .map(|(i, &paradigm)| {
                    let (metrics, error) = match &result {
                        Ok(ms) => (Some(ms[i].clone()), None),
                        Err(e) => (None, Some(e.clone())),
                    };
                    ResultRow { model, scheme, paradigm, seed, metrics, error }
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<ResultRow> = outcomes.into_iter().flatten().collect();
    // model, scheme, paradigm, seed in configuration order
    let rank = |v: &ResultRow| {
        (
            cfg.models.iter().position(|m| *m == v.model),
            cfg.schemes.iter().position(|s| *s == v.scheme),
            cfg.paradigms.iter().position(|p| *p == v.paradigm),
            cfg.seeds.iter().position(|s| *s == v.seed),
        )
    };
    rows.sort_by_key(|r| rank(r));
    let summary = summarize(&rows, cfg);
    Ok(GridReport { config: cfg.clone(), rows, summary })
}

pub fn summarize(rows: &[ResultRow], cfg: &ExperimentConfig) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &model in &cfg.models {
        for &scheme in &cfg.schemes {
            for &paradigm in &cfg.paradigms {
                let group: Vec<&ResultRow> =
                    rows.iter().filter(|r| r.model == model && r.scheme == scheme && r.paradigm == paradigm).collect();
                let ok: Vec<&Metrics> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
                let pick = |f: fn(&Metrics) -> f64| mean_std(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
                let mut confusion = ConfusionMatrix::new(Class::ALL.len());
                for m in &ok {
                    confusion.counts.iter_mut().zip(&m.confusion.counts).for_each(|(a, b)| *a += b);
                }
                out.push(SummaryRow {
                    model,
                    scheme,
                    paradigm,
                    runs: ok.len(),
                    failed: group.len() - ok.len(),
                    accuracy: pick(|m| m.accuracy),
                    precision: pick(|m| m.precision),
                    recall: pick(|m| m.recall),
                    f_score: pick(|m| m.f_score),
                    confusion,
                });
            }
        }
    }
    out
}

impl GridReport {
    pub fn summary_for(&self, model: ModelKind, scheme: Scheme, paradigm: Paradigm) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.model == model && s.scheme == scheme && s.paradigm == paradigm)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> Result<String, Error> {
        let failures: Vec<serde_json::Value> = self
            .rows
            .iter()
            .filter_map(|r| {
                r.error.as_ref().map(|e| {
                    serde_json::json!({
                        "model": r.model, "scheme": r.scheme, "paradigm": r.paradigm, "seed": r.seed, "error": e
                    })
                })
            })
            .collect();
        let value = serde_json::json!({
            "config": self.config,
            "summary": self.summary,
            "failures": failures,
        });
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }

    /// Paradigms as rows, schemes as column groups, one block per model.
    pub fn table(&self) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        let cell = 17;
        let _ = write!(out, "{:<12}", "paradigm");
        for s in &cfg.schemes {
            let _ = write!(out, "| {:<w$}", s.name(), w = 2 * cell + 1);
        }
        out.push('\n');
        let _ = write!(out, "{:<12}", "");
        for _ in &cfg.schemes {
            let _ = write!(out, "| {:<cell$} {:<cell$}", "accuracy", "f_score");
        }
        out.push('\n');
        for &model in &cfg.models {
            let _ = writeln!(out, "[{}]", model.name());
            for &p in &cfg.paradigms {
                let _ = write!(out, "{:<12}", p.name());
                for &s in &cfg.schemes {
                    let (a, f) = match self.summary_for(model, s, p) {
                        Some(r) if r.runs > 0 => (
                            format!("{:.2}±{:.2}", r.accuracy.mean, r.accuracy.std),
                            format!("{:.2}±{:.2}", r.f_score.mean, r.f_score.std),
                        ),
                        _ => ("failed".to_string(), "failed".to_string()),
                    };
                    let _ = write!(out, "| {a:<cell$} {f:<cell$}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Writes results.csv, summary.json, table.txt and confusion/*.csv.
    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        let put = |name: &str, text: &str| write_atomic(&dir.join(name), text.as_bytes()).map_err(Error::from);
        put("results.csv", &self.results_csv())?;
        put("summary.json", &self.summary_json()?)?;
        put("table.txt", &self.table())?;
        for s in &self.summary {
            let name = format!("confusion/{}_{}_{}.csv", s.model.name(), s.scheme.name(), s.paradigm.name());
            put(&name, &s.confusion.to_csv())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_sample() {
        let m = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]).std, 0.0);
    }

    #[test]
    fn failed_row_has_full_width() {
        let r = ResultRow {
            model: ModelKind::Linear,
            scheme: Scheme::Mw,
            paradigm: Paradigm::Both,
            seed: 3,
            metrics: None,
            error: Some("boom".into()),
        };
        let line = r.csv_line();
        assert_eq!(line.split(',').count(), RESULTS_HEADER.split(',').count());
        assert!(line.starts_with("linear,mw,both,3,failed,"));
    }
}
